"""Hartree-Fock charge density wave solvers for the t-t'-V and 2D Luttinger models."""

import json
import math

from . import _core
from ._core import LuttParams, TtpvParams, code_version, schema_version

__all__ = [
    "LuttParams",
    "TtpvParams",
    "boundaries",
    "code_version",
    "omega_hf",
    "point",
    "schema_version",
    "selfcheck",
    "ttpv_params",
    "luttinger_params",
]


def ttpv_params(t=1.0, tp=0.0, V=4.0, mu=0.0, beta=1e5, L=100):
    p = TtpvParams()
    p.t, p.t_prime, p.V, p.mu, p.beta, p.L = t, tp, V, mu, beta, L
    p.validate()
    return p


def luttinger_params(t=1.0, tp=0.0, V=4.0, beta=1e5, kappa=0.8, Q=None, Q_pi=0.45, band="taylor",
                     antinodal_count=6400):
    p = LuttParams()
    p.t, p.t_prime, p.V, p.beta, p.kappa = t, tp, V, beta, kappa
    p.Q = Q if Q is not None else Q_pi * math.pi
    p.band = band
    p.antinodal_count = antinodal_count
    p.validate()
    return p


def point(model="ttpv", mu=0.0, **params):
    """Both branches at one chemical potential, as dicts keyed "N" and "CDW"."""
    if model == "ttpv":
        return json.loads(_core.ttpv_point(ttpv_params(mu=mu, **params)))
    if model == "luttinger":
        return json.loads(_core.luttinger_point(luttinger_params(**params), mu))
    raise ValueError(f"unknown model {model!r}")


def boundaries(model="ttpv", mu_min=None, mu_max=None, n_mu=201, q_fixed=False, n_side=False, **params):
    """Crossings of the CDW and N branches located on a mu scan."""
    if model == "ttpv":
        p = ttpv_params(**params)
        w = 4 * p.t + 4 * abs(p.t_prime) + 0.5
        lo = -w if mu_min is None else mu_min
        hi = 2 * p.V + w if mu_max is None else mu_max
        return json.loads(_core.ttpv_boundaries(p, lo, hi, n_mu))
    if model == "luttinger":
        if mu_min is None or mu_max is None:
            raise ValueError("luttinger boundaries need mu_min and mu_max")
        p = luttinger_params(**params)
        return json.loads(_core.luttinger_boundaries(p, mu_min, mu_max, n_mu, q_fixed, n_side))
    raise ValueError(f"unknown model {model!r}")


def omega_hf(q, m, **params):
    """HF grand potential per site of the t-t'-V model for a full ten-parameter ansatz."""
    return _core.omega_hf(ttpv_params(**params), list(q), list(m))


def selfcheck():
    return json.loads(_core.selfcheck())
