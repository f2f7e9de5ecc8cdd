"""Matrices de tráfico hiperdispersas y su almacenamiento en archivos tar."""
