"""Model builders shared by the test modules."""

import numpy as np

from causal_var import VarModel, check_stability


def random_stable_model(rng: np.random.Generator, dim: int, lag: int, radius: float = 0.9, intercept: bool = True):
    """A random VAR rescaled so its spectral radius equals *radius*.

    Scaling ``B_k`` by ``c**k`` scales every companion eigenvalue by ``c``.
    """
    coeffs = rng.normal(size=(lag, dim, dim)) / dim
    current = check_stability(VarModel(np.zeros(dim), coeffs, np.eye(dim))).spectral_radius
    if current > 0:
        c = radius / current
        coeffs = coeffs * np.array([c ** (k + 1) for k in range(lag)])[:, None, None]
    factor = rng.normal(size=(dim, dim))
    noise_cov = factor @ factor.T / dim + 0.1 * np.eye(dim)
    nu = rng.normal(size=dim) if intercept else np.zeros(dim)
    return VarModel(nu, coeffs, noise_cov, name=f"random-{dim}x{lag}")


def noiseless(model: VarModel) -> VarModel:
    return model.replace(noise_cov=np.zeros((model.dim, model.dim)))
