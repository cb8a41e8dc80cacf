"""Tour of the correlated bit-flip error model.

Builds a model from per-bit flip probabilities and a shared correlation,
compares its quadrature pmf against sampled pattern frequencies, fits a fresh
model back from the samples, and shows a flip pattern hitting a stored
fixed-point word.
"""

import argparse

import numpy as np

from ntvsim.errormodel import fit, inject, pmf, sample_batch, synthesize
from ntvsim.fixedpoint import FixedFormat, quantize, to_real


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)

    probs = np.array([0.02, 0.05, 0.2])
    corr = 0.4
    model = synthesize(probs, corr)
    print(f"model: per-bit flip probabilities {probs.tolist()}, correlation {corr}")
    print(f"latent thresholds: {np.round(model.latent_mean, 4).tolist()}")

    n = 200_000
    draws = sample_batch(model, n, rng)
    print(f"\npattern        pmf   sampled   ({n} draws)")
    for k in range(8):
        eta = np.array([(k >> i) & 1 for i in range(3)])
        p = pmf(model, eta)
        freq = float((draws == eta).all(axis=1).mean())
        print(f"{eta.tolist()}  {p:8.5f}  {freq:8.5f}")

    fitted = fit(draws)
    print(f"\nfit from samples: marginals {np.round(fitted.bit_probs, 4).tolist()}")
    print(f"fitted pairwise latent correlations: "
          f"{np.round(fitted.latent_corr[np.triu_indices(3, 1)], 3).tolist()}")

    fmt = FixedFormat(3, 1)
    word = quantize(1.5, fmt)
    eta = np.array([1, 0, 1])
    hit = inject(word, eta)
    print(f"\nstored {to_real(word)} as code {word.code} in Q{fmt.total_bits}.{fmt.frac_bits}")
    print(f"flip pattern {eta.tolist()} -> code {hit.code} = {to_real(hit)}")
    print(f"flipping again restores {to_real(inject(hit, eta))}")


if __name__ == "__main__":
    main()
