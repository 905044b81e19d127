import logging
from pathlib import Path

import meshio
import numpy as np

from core.biot import BiotOperators, DiscreteState, reconstruct_full
from core.fem import rt0_cell_averages


def export_fields(ops: BiotOperators, state: DiscreteState, network, path) -> Path:
    """Write the reconstructed fields of one state as a legacy VTK grid.

    Cell data: full pressure and the magnitude of the cell-averaged full
    flux. Point data: displacement.
    """
    path = Path(path)
    if path.suffix != ".vtk":
        path = path.with_suffix(".vtk")
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)

    mesh = ops.mesh
    p_full, w_full = reconstruct_full(ops, state, network)
    flux = rt0_cell_averages(mesh, w_full)

    grid = meshio.Mesh(
        points=np.asarray(mesh.vertices),
        cells=[("tetra", np.asarray(mesh.cells))],
        point_data={"displacement": state.u.reshape(-1, 3)},
        cell_data={
            "pressure": [p_full],
            "flux_magnitude": [np.linalg.norm(flux, axis=1)],
        },
    )
    meshio.write(path, grid, file_format="vtk", binary=False)
    logging.info(f"Exported t={state.t:.3f} fields on {mesh.n_cells} cells to {path}")
    return path
