"""Navier-Stokes-Cahn-Hilliard simulator with surfactant on a 2D MAC grid."""
