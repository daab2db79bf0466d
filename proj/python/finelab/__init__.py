"""Discrete p-capacity, Wiener tests and Cartan-type constructions on weighted graphs."""

from ._finelab import (
    AnalyticSet,
    FinelabError,
    Space,
    __version__,
    ball_nodes,
    capacitary_potential,
    classify_terms,
    cube_grid,
    defaults,
    product_bounds,
    radial_grid,
    run_scenario,
    scale_grid,
    sobolev_capacity,
    solve_obstacle,
    strong_cartan,
    variational_capacity,
    weak_cartan,
    wiener_terms,
)

__all__ = [
    "AnalyticSet",
    "FinelabError",
    "Space",
    "__version__",
    "ball_nodes",
    "capacitary_potential",
    "classify_terms",
    "cube_grid",
    "defaults",
    "product_bounds",
    "radial_grid",
    "run_scenario",
    "scale_grid",
    "sobolev_capacity",
    "solve_obstacle",
    "strong_cartan",
    "variational_capacity",
    "weak_cartan",
    "wiener_terms",
]
