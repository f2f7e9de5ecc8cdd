"""Pasos del reto: anonimizar, construir, guardar, leer, sumar y analizar."""
