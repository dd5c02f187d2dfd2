"""One-period error of the effective Dirac envelope against the full Schrödinger flow, per ε.

Halving ε should roughly halve the error.  Prints the successive ratios.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from floquet_dirac import bloch, dirac, flow
from floquet_dirac.potential import make_canonical_honeycomb

from _common import parse_config, write_outputs


@dataclass
class Config:
    V0: float = 10.0
    cutoff: int = 4
    R: float = 1.0
    omega: float = 2.0
    eps_list: list = field(default_factory=lambda: [0.125, 0.0625])
    L: int = 48
    d0: float = 0.2
    width: float = 0.15
    periods: int = 1
    tol: float = 1e-4
    out_dir: str = "out/epsilon_scaling"


def main(argv=None):
    cfg = parse_config(Config, __doc__, argv)
    V = make_canonical_honeycomb(cfg.V0)
    d = bloch.find_dirac_point(V, bloch.PlaneWaveBasis.ball(cfg.cutoff))
    forcing = dirac.circular(cfg.R, cfg.omega)
    env = flow.gaussian_envelope(cfg.L, cfg.d0, cfg.width, spinor=(1.0, 0.5))
    rows = []
    for eps in cfg.eps_list:
        curve = flow.validate_effective_dynamics(V, d, forcing, eps, env, cfg.periods, tol=cfg.tol)
        rows.append((eps, curve.n_cells, float(curve.error[-1])))
        print(f"eps={eps:g}  N={curve.n_cells}  error={curve.error[-1]:.5f}", flush=True)
    errs = np.array([r[2] for r in rows])
    ratios = (errs[1:] / errs[:-1]).tolist()
    write_outputs(cfg.out_dir, "epsilon_scaling", ["epsilon", "n_cells", "error"], rows,
                  {"E_D": d.E_D, "v_D": d.v_D, "errors": errs.tolist(), "ratios": ratios})


if __name__ == "__main__":
    main()
