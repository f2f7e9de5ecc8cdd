"""
Módulo de reportes de escalamiento
Agrega los bench.csv de varias corridas: rendimiento (paquetes/s), tiempo medio
por fase, aceleración y eficiencia respecto de 1 proceso / 1 hilo.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd

from pipeline.process import PHASES

from .runner import BENCH_COLUMNS

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    'n_procs', 'n_threads', 'cores', 'runs', 'windows', 'packets', 'makespan_s',
    'throughput_pps', 'mean_read_s', 'mean_sum_s', 'mean_analyze_s', 'speedup', 'efficiency',
]


class BenchCsvError(Exception):
    """CSV de tiempos mal formado."""

    def __init__(self, message: str, path=None, line: int = 0):
        super().__init__(f"{path}:{line}: {message}" if path is not None else message)
        self.path = path
        self.line = line


def load_bench_csv(path) -> pd.DataFrame:
    """
    Lee y valida un bench.csv.

    Raises:
        BenchCsvError: con el número de línea (1 = cabecera) del primer defecto
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise BenchCsvError("archivo no encontrado", path, 0)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise BenchCsvError(f"CSV ilegible: {e}", path, 1)
    if list(df.columns) != BENCH_COLUMNS:
        raise BenchCsvError(f"cabecera inesperada: {','.join(df.columns)}", path, 1)

    for i, row in enumerate(df.itertuples(index=False)):
        line = i + 2
        if row.phase not in PHASES:
            raise BenchCsvError(f"fase desconocida {row.phase!r}", path, line)
        try:
            ints = [int(getattr(row, c)) for c in ('window_id', 'pid', 'n_procs', 'n_threads', 'packets_processed')]
            wall = float(row.wall_seconds)
        except ValueError:
            raise BenchCsvError("valor no numérico", path, line)
        if wall <= 0 or min(ints) < 0 or ints[2] < 1 or ints[3] < 1:
            raise BenchCsvError("valor fuera de rango", path, line)

    out = df.astype({'window_id': int, 'pid': int, 'n_procs': int, 'n_threads': int,
                     'wall_seconds': float, 'packets_processed': int})
    return out


def format_table(table: pd.DataFrame) -> str:
    shown = table.copy()
    for col in ('makespan_s', 'mean_read_s', 'mean_sum_s', 'mean_analyze_s'):
        shown[col] = shown[col].map(lambda v: f"{v:.4f}")
    shown['throughput_pps'] = shown['throughput_pps'].map(lambda v: f"{v:,.0f}")
    shown['speedup'] = shown['speedup'].map(lambda v: f"{v:.2f}")
    shown['efficiency'] = shown['efficiency'].map(lambda v: f"{v:.2f}")
    return shown.to_string(index=False)


PLOT_TEMPLATE = '''"""
Gráfico de escalamiento generado por `challenge.py report`.
Ejecutar: python {script_name}  (requiere pandas y plotly)
"""

import io

import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

DATA = """{csv}"""


def main():
    df = pd.read_csv(io.StringIO(DATA))
    fig = make_subplots(rows=1, cols=2, subplot_titles=(
        "Rendimiento (paquetes/s)", "Tiempo medio por fase (s)"))
    for n_threads, group in df.groupby("n_threads"):
        group = group.sort_values("n_procs")
        fig.add_trace(go.Scatter(
            x=group["cores"], y=group["throughput_pps"], mode="lines+markers",
            name=f"{{n_threads}} hilos"), row=1, col=1)
    ideal = df["throughput_pps"].iloc[0] * df["cores"] / df["cores"].iloc[0]
    fig.add_trace(go.Scatter(x=df["cores"], y=ideal, mode="lines",
                             name="lineal", line=dict(dash="dash")), row=1, col=1)
    for phase in ("sum", "analyze"):
        fig.add_trace(go.Bar(x=df["cores"].astype(str), y=df[f"mean_{{phase}}_s"],
                             name=phase), row=1, col=2)
    fig.update_xaxes(type="log", title_text="núcleos", row=1, col=1)
    fig.update_yaxes(type="log", row=1, col=1)
    fig.update_layout(title="Suma y análisis de matrices de tráfico", height=500)
    fig.write_html("{html_name}")
    print("Gráfico guardado en {html_name}")


if __name__ == "__main__":
    main()
'''


class ScalingReport:
    """
    Reporte de escalamiento sobre los bench.csv de varias corridas.

    El makespan de una corrida es el máximo, sobre pids, de la suma de tiempos de
    sus fases; con varias corridas de la misma configuración se promedia.
    """

    def __init__(self, frames: Sequence[pd.DataFrame]):
        self.frames: List[pd.DataFrame] = list(frames)

    @classmethod
    def from_csvs(cls, bench_csvs: Sequence) -> "ScalingReport":
        if not bench_csvs:
            raise BenchCsvError("se necesita al menos un CSV")
        return cls([load_bench_csv(p) for p in bench_csvs])

    def _runs(self) -> List[Dict]:
        runs = []
        for run_id, df in enumerate(self.frames):
            for (n_procs, n_threads), group in df.groupby(['n_procs', 'n_threads']):
                per_pid = group.groupby('pid')['wall_seconds'].sum()
                sums = group[group['phase'] == 'sum']
                means = group.groupby('phase')['wall_seconds'].mean()
                runs.append({
                    'run': run_id,
                    'n_procs': int(n_procs),
                    'n_threads': int(n_threads),
                    'windows': int(sums['window_id'].nunique()),
                    'packets': int(sums['packets_processed'].sum()),
                    'makespan_s': float(per_pid.max()),
                    **{f'mean_{p}_s': float(means.get(p, float('nan'))) for p in PHASES},
                })
        return runs

    def table(self) -> pd.DataFrame:
        """Tabla de escalamiento por (n_procs, n_threads)."""
        runs = self._runs()
        if not runs:
            return pd.DataFrame(columns=REPORT_COLUMNS)

        per_run = pd.DataFrame(runs)
        table = per_run.groupby(['n_procs', 'n_threads'], as_index=False).agg(
            runs=('run', 'count'),
            windows=('windows', 'mean'),
            packets=('packets', 'mean'),
            makespan_s=('makespan_s', 'mean'),
            mean_read_s=('mean_read_s', 'mean'),
            mean_sum_s=('mean_sum_s', 'mean'),
            mean_analyze_s=('mean_analyze_s', 'mean'),
        )
        table['cores'] = table['n_procs'] * table['n_threads']
        table['throughput_pps'] = table['packets'] / table['makespan_s']

        base = table[(table['n_procs'] == 1) & (table['n_threads'] == 1)]
        if base.empty:
            base = table.sort_values(['cores', 'n_procs']).head(1)
            logger.warning(
                f"Sin corrida 1x1; la base es np={int(base['n_procs'].iloc[0])}, "
                f"nt={int(base['n_threads'].iloc[0])}"
            )
        base_makespan = float(base['makespan_s'].iloc[0])
        base_cores = int(base['cores'].iloc[0])
        table['speedup'] = base_makespan / table['makespan_s']
        table['efficiency'] = table['speedup'] * base_cores / table['cores']
        table = table.sort_values(['n_procs', 'n_threads']).reset_index(drop=True)
        return table[REPORT_COLUMNS]

    def phase_comparison(self) -> Dict[str, float]:
        """Tiempo medio de suma vs análisis sobre todas las mediciones."""
        df = pd.concat(self.frames, ignore_index=True)
        means = df.groupby('phase')['wall_seconds'].mean()
        sum_s = float(means.get('sum', 0.0)) + float(means.get('read', 0.0))
        analyze_s = float(means.get('analyze', 0.0))
        return {'mean_sum_s': sum_s, 'mean_analyze_s': analyze_s, 'sum_exceeds_analyze': sum_s > analyze_s}

    def lines(self, table: pd.DataFrame) -> List[str]:
        comparison = self.phase_comparison()
        verdict = "sí" if comparison['sum_exceeds_analyze'] else "no"
        return [
            format_table(table),
            "",
            f"Suma (lectura incluida) media: {comparison['mean_sum_s']:.4f} s | "
            f"análisis medio: {comparison['mean_analyze_s']:.4f} s | "
            f"la suma tarda más que el análisis: {verdict}",
        ]

    def save(self, out_dir) -> pd.DataFrame:
        """Escribe scaling.txt, scaling.csv y plot_scaling.py; devuelve la tabla."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        table = self.table()
        text = self.lines(table)
        (out_dir / "scaling.txt").write_text("\n".join(text) + "\n", encoding='utf-8')
        table.to_csv(out_dir / "scaling.csv", index=False, encoding='utf-8')
        script = PLOT_TEMPLATE.format(script_name="plot_scaling.py", html_name="scaling.html",
                                      csv=table.to_csv(index=False))
        (out_dir / "plot_scaling.py").write_text(script, encoding='utf-8')

        logger.info("=" * 60)
        logger.info("REPORTE DE ESCALAMIENTO")
        logger.info("=" * 60)
        for line in text:
            logger.info(line)
        logger.info(f"✓ Reporte guardado en {out_dir}")
        return table


def scaling_table(frames: Sequence[pd.DataFrame]) -> pd.DataFrame:
    return ScalingReport(frames).table()


def cmd_report(bench_csvs: Sequence, out_dir) -> pd.DataFrame:
    """
    Genera scaling.txt, scaling.csv y plot_scaling.py a partir de bench.csv.

    Returns:
        La tabla de escalamiento
    """
    return ScalingReport.from_csvs(bench_csvs).save(out_dir)
