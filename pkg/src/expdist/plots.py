"""Static raster plots for the export command.

matplotlib is imported lazily so the core library carries no plotting
dependency; install the `plot` extra to use these.
"""

import numpy as np


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _tripcolor(ax, grid, tri_values, title):
    nodes = grid.nodes
    ax.tripcolor(
        nodes.real, nodes.imag, grid.triangles, facecolors=np.asarray(tri_values, dtype=float)
    )
    ax.set_title(title)
    ax.set_aspect("equal")


def field_plots(map_field, phi, out_prefix):
    """Write |mu|, K, |Phi|, arg Phi panels; returns the written paths."""
    from .grid import wirtinger

    plt = _mpl()
    df = wirtinger(map_field)
    grid = map_field.grid
    panels = [
        ("abs_mu", np.abs(df.mu), "|mu|"),
        ("big_k", df.big_k, "distortion K"),
        ("abs_phi", np.abs(phi.values), "|Phi| (scaled)"),
        ("arg_phi", np.angle(phi.values), "arg Phi"),
    ]
    paths = []
    for stem, vals, title in panels:
        fig, ax = plt.subplots(figsize=(5, 4))
        _tripcolor(ax, grid, vals, title)
        fig.colorbar(ax.collections[0], ax=ax)
        path = f"{out_prefix}_{stem}.png"
        fig.savefig(path, dpi=130)
        plt.close(fig)
        paths.append(path)
    return paths


def energy_curve_plot(p_values, normalized, out_path):
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(p_values, normalized, "o-")
    ax.set_xscale("log")
    ax.set_xlabel("p")
    ax.set_ylabel("normalized energy")
    ax.set_title("normalized energy vs p")
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
