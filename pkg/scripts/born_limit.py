"""Weak-scatterer agreement of the two engines and Born bin-count sensitivity.

    python scripts/born_limit.py
"""

from cyltomo.metrics import delta_v
from cyltomo.recon import born_reconstruct, lowpass_2k0, measured_amplitude, reconstruct_grid, truth_fields
from cyltomo.scene import preset


def main():
    base = preset("fig2")
    for eps in (1.0005, 1.001, 1.002):
        s = base.with_epsilon(eps)
        f, _ = measured_amplitude(s)
        R = s.array.radius
        nov = lowpass_2k0(reconstruct_grid(f, s.grid, s.medium, R), s.medium)
        _, ft = truth_fields(s)
        print(f"eps={eps}: novikov vs filtered truth {delta_v(nov, ft, R):.4f}")
        for m in (40, 128, 256, 512):
            b = born_reconstruct(f, s.grid, s.medium, samples=m)
            print(f"   Born with {m:3d} angles: vs novikov {delta_v(nov, b, R):.4f}, vs truth {delta_v(b, ft, R):.4f}")


if __name__ == "__main__":
    main()
