from .projection import (
    divergence_at_quadrature,
    interpolate_hdiv,
    project_l2,
    values_at_quadrature,
)
from .quadrature import QuadratureRule, gauss_interval, triangle_quadrature
from .reference import ReferenceBasis, reference_dg_basis, reference_rt_basis, rt_dofs
from .space import (
    CellGeometry,
    Field,
    FunctionSpace,
    build_space,
    cell_geometry,
    evaluate_field,
    perp,
    piola_push_forward,
    tangent_project,
)

__all__ = [
    "CellGeometry",
    "Field",
    "FunctionSpace",
    "QuadratureRule",
    "ReferenceBasis",
    "build_space",
    "cell_geometry",
    "divergence_at_quadrature",
    "evaluate_field",
    "gauss_interval",
    "interpolate_hdiv",
    "perp",
    "piola_push_forward",
    "project_l2",
    "reference_dg_basis",
    "reference_rt_basis",
    "rt_dofs",
    "tangent_project",
    "triangle_quadrature",
    "values_at_quadrature",
]
