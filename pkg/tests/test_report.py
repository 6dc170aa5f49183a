import numpy as np

from porouscity.diagnostics import BudgetRow
from porouscity.report import budget_series, field_map, vector_map

from _meshes import structured_square


def _row(t, total):
    return BudgetRow(
        t=t, streets_total=total, injection_rate=1.0, parking_rate=0.5,
        outflux_rate=0.1, residual=0.0, rho_min=0.0, rho_mean=1.0,
        rho_max=2.0, speed_min=0.0, speed_mean=1.0, speed_max=2.0,
        rho_min_preclamp=0.0, clamp_mass=0.0,
    )


def test_field_map_writes_png(tmp_path, rng):
    mesh = structured_square(4)
    path = field_map(mesh, rng.uniform(0, 1, mesh.n_nodes), "demo",
                     tmp_path / "field.png")
    data = (tmp_path / "field.png").read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert path.endswith("field.png")


def test_vector_map_writes_png(tmp_path, rng):
    mesh = structured_square(4)
    vector_map(mesh, rng.normal(size=(mesh.n_nodes, 2)), "speed",
               tmp_path / "vec.png")
    assert (tmp_path / "vec.png").stat().st_size > 0


def test_budget_series_writes_png(tmp_path):
    rows = [_row(0.01 * k, 100.0 + k) for k in range(1, 20)]
    budget_series(rows, tmp_path / "budget.png")
    assert (tmp_path / "budget.png").stat().st_size > 0
