"""
Dashboard de Escalamiento - Reto de Tráfico
Tabla de escalamiento, aceleración/eficiencia y estadísticas por ventana.

Ejecutar:
    streamlit run src/visualization/dashboard_escalamiento.py
"""

import sys
from pathlib import Path

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go
import streamlit as st
from plotly.subplots import make_subplots

# Agregar src al path
sys.path.insert(0, str(Path(__file__).parent.parent))

from pipeline.analysis import NetworkStats
from pipeline.process import read_stats_file

DEFAULT_REPORT = "data/sweep/report/scaling.csv"
DEFAULT_STATS = "data/run/stats_merged.jsonl"

STAT_LABELS = {
    'valid_packets': 'Paquetes válidos',
    'unique_links': 'Enlaces únicos',
    'max_link_packets': 'Máx. paquetes por enlace',
    'unique_sources': 'Fuentes únicas',
    'max_source_packets': 'Máx. paquetes por fuente',
    'max_source_fanout': 'Máx. fan-out',
    'unique_destinations': 'Destinos únicos',
    'max_dest_packets': 'Máx. paquetes por destino',
    'max_dest_fanin': 'Máx. fan-in',
}


@st.cache_data(ttl=3600)
def load_scaling(path: str) -> pd.DataFrame:
    """Carga scaling.csv generado por `challenge.py report`."""
    df = pd.read_csv(path)
    return df.sort_values(['n_procs', 'n_threads']).reset_index(drop=True)


@st.cache_data(ttl=3600)
def load_window_stats(path: str) -> pd.DataFrame:
    """Carga y cachea los resultados combinados."""
    return read_stats_file(path)


def plot_speedup(table: pd.DataFrame) -> go.Figure:
    """Aceleración y eficiencia contra núcleos, con la recta ideal."""
    fig = make_subplots(specs=[[{"secondary_y": True}]])
    for n_threads, group in table.groupby('n_threads'):
        group = group.sort_values('cores')
        fig.add_trace(go.Scatter(
            x=group['cores'], y=group['speedup'], mode='lines+markers',
            name=f'Aceleración ({n_threads} hilos)'
        ), secondary_y=False)
        fig.add_trace(go.Bar(
            x=group['cores'], y=group['efficiency'], name=f'Eficiencia ({n_threads} hilos)',
            opacity=0.35
        ), secondary_y=True)
    cores = sorted(table['cores'].unique())
    fig.add_trace(go.Scatter(x=cores, y=cores, mode='lines', name='Lineal',
                             line=dict(dash='dash', color='#9ca3af')), secondary_y=False)
    fig.update_layout(title='🚀 Aceleración y Eficiencia', height=450, hovermode='x unified')
    fig.update_xaxes(title_text='Núcleos (procesos x hilos)')
    fig.update_yaxes(title_text='Aceleración', secondary_y=False)
    fig.update_yaxes(title_text='Eficiencia', range=[0, 1.2], secondary_y=True)
    return fig


def plot_phase_times(table: pd.DataFrame) -> go.Figure:
    """Tiempo medio por fase (suma vs análisis) en cada configuración."""
    labels = [f"{p}x{t}" for p, t in zip(table['n_procs'], table['n_threads'])]
    fig = go.Figure()
    fig.add_trace(go.Bar(x=labels, y=table['mean_sum_s'], name='Suma', marker=dict(color='#667eea')))
    fig.add_trace(go.Bar(x=labels, y=table['mean_analyze_s'], name='Análisis', marker=dict(color='#10b981')))
    fig.update_layout(
        title='⏱️ Tiempo Medio por Fase',
        xaxis_title='Procesos x Hilos',
        yaxis_title='Segundos',
        barmode='group',
        height=400
    )
    return fig


def plot_window_stats(stats: pd.DataFrame, column: str = 'valid_packets') -> go.Figure:
    """Una estadística por ventana (matriz completa)."""
    full = stats[stats['subrange'] == -1].sort_values('window_id')
    fig = px.bar(
        full, x='window_id', y=column,
        title=f"📦 {STAT_LABELS.get(column, column)} por Ventana",
        labels={'window_id': 'Ventana', column: STAT_LABELS.get(column, column)},
        color_discrete_sequence=['#764ba2']
    )
    fig.update_layout(height=400, showlegend=False)
    return fig


def main():
    """Función principal del dashboard."""
    st.set_page_config(
        page_title="Escalamiento - Reto de Tráfico",
        page_icon="📈",
        layout="wide"
    )
    st.title("📈 Suma y Análisis de Matrices de Tráfico")
    st.markdown("---")

    with st.sidebar:
        st.header("⚙️ Archivos")
        report_path = st.text_input("scaling.csv", DEFAULT_REPORT)
        stats_path = st.text_input("Resultados combinados", DEFAULT_STATS)

    if Path(report_path).exists():
        table = load_scaling(report_path)
        st.subheader("🎯 Escalamiento")
        best = table.loc[table['speedup'].idxmax()]
        col1, col2, col3 = st.columns(3)
        col1.metric("Mejor aceleración", f"{best['speedup']:.2f}x", f"{int(best['cores'])} núcleos")
        col2.metric("Eficiencia", f"{best['efficiency']:.0%}")
        col3.metric("Rendimiento", f"{best['throughput_pps']:,.0f} paq/s")

        col1, col2 = st.columns(2)
        with col1:
            st.plotly_chart(plot_speedup(table), use_container_width=True)
        with col2:
            st.plotly_chart(plot_phase_times(table), use_container_width=True)
        st.dataframe(table, use_container_width=True, hide_index=True)
    else:
        st.info(f"No se encontró {report_path}. Ejecuta `python src/challenge.py sweep` primero.")

    st.markdown("---")

    if Path(stats_path).exists():
        stats = load_window_stats(stats_path)
        st.subheader("🌐 Propiedades por Ventana")
        column = st.selectbox("Estadística", NetworkStats.field_names(),
                              format_func=lambda c: STAT_LABELS[c])
        st.plotly_chart(plot_window_stats(stats, column), use_container_width=True)
        st.dataframe(stats, use_container_width=True, hide_index=True)
    else:
        st.info(f"No se encontró {stats_path}.")


if __name__ == "__main__":
    main()
