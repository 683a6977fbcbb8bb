"""Figure rendering for sweep, beam-profile, and training-history outputs.

Every figure is written next to its CSV with the same basename.  PNG metadata
is pinned so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .estimator_nn import TrainHistory
from .evaluation import BeamProfile, SweepResult

_PNG_METADATA = {"Software": "curvris"}
_DESIGN_STYLE = {
    "planar": dict(color="tab:blue", marker="o"),
    "proposed": dict(color="tab:red", marker="s"),
    "oracle": dict(color="tab:orange", marker="^"),
}
_AXIS_LABEL = {"sigma": "geometry spread sigma", "epsilon": "location error bound (m)"}


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=_PNG_METADATA)
    plt.close(fig)


def save_sweep_plot(result: SweepResult, path) -> None:
    """Mean SNR vs the swept variable, one errorbar line per design."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for di, design in enumerate(result.designs):
        ax.errorbar(result.values, result.mean_snr_db[:, di],
                    yerr=result.stderr_db[:, di], label=design, capsize=3,
                    **_DESIGN_STYLE.get(design, {}))
    ax.set_xlabel(_AXIS_LABEL.get(result.variable, result.variable))
    ax.set_ylabel("mean Rx SNR (dB)")
    ax.grid(True, alpha=0.4)
    ax.legend()
    _save(fig, path)


def save_profile_plot(profile: BeamProfile, path) -> None:
    """Line cut or 2-D map of received power around the target."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if profile.grid_shape is None:
        ax.plot(profile.offsets, profile.rel_db, color="tab:blue")
        ax.set_xlabel(f"offset along {profile.axis} (m)")
        ax.set_ylabel("received power rel. peak (dB)")
    else:
        nx, ny = profile.grid_shape
        x = profile.offsets[:, 0].reshape(nx, ny)
        y = profile.offsets[:, 1].reshape(nx, ny)
        mesh = ax.pcolormesh(x, y, profile.rel_db.reshape(nx, ny), shading="auto")
        fig.colorbar(mesh, ax=ax, label="received power rel. peak (dB)")
        ax.set_xlabel("offset along x (m)")
        ax.set_ylabel("offset along y (m)")
    ax.grid(True, alpha=0.4)
    _save(fig, path)


def save_training_plot(history: TrainHistory, path) -> None:
    """Training and validation MSE per epoch on a log scale."""
    epochs = np.arange(1, history.n_epochs + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(epochs, history.train_mse, label="training MSE", color="tab:blue")
    ax.semilogy(epochs, history.val_mse, label="validation MSE", color="tab:orange")
    ax.axvline(history.best_epoch, color="gray", linestyle="--", alpha=0.7,
               label=f"best epoch {history.best_epoch}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE")
    ax.grid(True, alpha=0.4)
    ax.legend()
    _save(fig, path)
