"""E_D and v_D across potential strengths and plane-wave cutoffs, with the cone-fit cross-check."""
from __future__ import annotations

from dataclasses import dataclass, field

from floquet_dirac import bloch
from floquet_dirac.potential import make_canonical_honeycomb

from _common import parse_config, write_outputs


@dataclass
class Config:
    V0_list: list = field(default_factory=lambda: [5.0, 10.0, 20.0])
    cutoffs: list = field(default_factory=lambda: [4, 5, 6, 7])
    cone_radii: list = field(default_factory=lambda: [0.005, 0.01, 0.02])
    out_dir: str = "out/dirac_survey"


def main(argv=None):
    cfg = parse_config(Config, __doc__, argv)
    rows = []
    for V0 in cfg.V0_list:
        V = make_canonical_honeycomb(V0)
        for nc in cfg.cutoffs:
            basis = bloch.PlaneWaveBasis.ball(nc)
            try:
                d = bloch.find_dirac_point(V, basis)
            except bloch.NoDiracPointError as err:
                print(f"V0={V0:g} cutoff={nc}: {err}")
                continue
            fit = bloch.fermi_velocity_cone_fit(V, d, cfg.cone_radii, 12)
            rows.append((V0, nc, basis.dim, d.E_D, d.v_D, fit.v_fit, abs(fit.v_fit - d.v_D) / d.v_D))
    write_outputs(cfg.out_dir, "dirac_survey",
                  ["V0", "cutoff", "dim", "E_D", "v_D", "v_cone", "v_relative_difference"], rows,
                  {"rows": len(rows), "max_v_relative_difference": max((r[-1] for r in rows), default=None)})


if __name__ == "__main__":
    main()
