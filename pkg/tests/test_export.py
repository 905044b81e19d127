import meshio
import numpy as np
import pytest

from core.biot import DiscreteState
from studies.export import export_fields


@pytest.mark.harness
class TestExport:

    @pytest.fixture(autouse=True)
    def _setup(self, ops4, case):
        self.ops = ops4
        self.network = case.network

    def test_round_trip(self, tmp_path):
        state = DiscreteState.zeros(self.ops.dofs, t=0.5)
        path = export_fields(self.ops, state, self.network, tmp_path / "out" / "state.vtk")
        assert path.exists()
        grid = meshio.read(path)
        assert len(grid.points) == self.ops.mesh.n_vertices
        assert grid.cells_dict["tetra"].shape == (self.ops.mesh.n_cells, 4)
        assert np.allclose(grid.point_data["displacement"], 0.0)
        # zero remainder leaves the interpolated singular pressure
        pressure = np.asarray(grid.cell_data["pressure"][0]).ravel()
        assert pressure.shape == (self.ops.mesh.n_cells,)
        assert np.all(pressure > 0.0)

    def test_suffix_is_forced(self, tmp_path):
        path = export_fields(self.ops, DiscreteState.zeros(self.ops.dofs), None, tmp_path / "state.txt")
        assert path.suffix == ".vtk"
        grid = meshio.read(path)
        assert np.allclose(np.asarray(grid.cell_data["flux_magnitude"][0]), 0.0)
