"""Generación de datos sintéticos, ejecución paralela y reportes de escalamiento."""
