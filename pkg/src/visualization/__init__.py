"""Paquete de visualización: dashboard de escalamiento."""
