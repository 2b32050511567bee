"""Shared pipeline builder for the test suite."""

from moshlab.cm import solve_ermakov
from moshlab.density import assemble_density
from moshlab.grids import RadialGrid, TimeGrid
from moshlab.rm import propagate, solve_ground_state

RM_MASS, CM_MASS = 0.5, 2.0


def build(interaction, protocol, t_final=1.0, n_steps=500, stride=50,
          grid=None):
    """(width, rm trajectory, density) for one scenario at test scale."""
    grid = grid or RadialGrid(12.0, 601)
    times = TimeGrid(t_final, n_steps)
    psi = solve_ground_state(interaction, protocol.omega_initial, RM_MASS, grid)[1]
    rm = propagate(psi, interaction, protocol, times, stride=stride)
    width = solve_ermakov(protocol, CM_MASS, times).strided(stride)
    return width, rm, assemble_density(width, rm, grid)
