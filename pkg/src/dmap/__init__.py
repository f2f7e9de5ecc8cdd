"""Mapas de distribución para repartir trabajo entre procesos."""
