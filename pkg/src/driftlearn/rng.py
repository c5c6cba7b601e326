"""Counter-based random numbers keyed by (seed, stream, path, counter).

Every draw is a pure function of its coordinates, so a simulation gives the same
numbers whatever the order, chunking or thread schedule in which paths are
generated.  Bits come from two rounds of the SplitMix64 finalizer applied to a
Weyl-spaced counter; Gaussians use Wichura's AS241 inverse normal CDF.
"""

import numpy as np

from ._accel import jit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_PATHMUL = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

# named streams
STREAM_DRIFT = 0
STREAM_BROWNIAN = 1
STREAM_STRATEGY = 2


@jit
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@jit
def counter_bits(key, path, ctr):
    h = mix64(key ^ (path * _PATHMUL))
    return mix64(h + (ctr + _ONE) * _GOLDEN)


@jit
def bits_to_uniform(bits):
    # (0, 1) open interval: never returns 0 or 1
    return ((bits >> _S11) + 0.5) * _INV53


@jit
def _ppnd_scalar(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@jit
def normal_at(key, path, ctr):
    return _ppnd_scalar(bits_to_uniform(counter_bits(key, path, ctr)))


def ppnd(p):
    """Inverse standard normal CDF (AS241), vectorized over ``p`` in (0, 1)."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    central = np.abs(q) <= 0.425
    out = np.empty_like(p)

    qc = q[central]
    r = 0.180625 - qc * qc
    num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
              + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
            + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
    den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
              + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
            + 4.2313330701600911252e1) * r + 1.0)
    out[central] = qc * num / den

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        pt = p[tail]
        r = np.sqrt(-np.log(np.where(qt < 0.0, pt, 1.0 - pt)))
        mid = r <= 5.0
        val = np.empty_like(r)
        rm = r[mid] - 1.6
        num = (((((((7.74545014278341407640e-4 * rm + 2.27238449892691845833e-2) * rm
                    + 2.41780725177450611770e-1) * rm + 1.27045825245236838258e0) * rm
                  + 3.64784832476320460504e0) * rm + 5.76949722146069140550e0) * rm
                + 4.63033784615654529590e0) * rm + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * rm + 5.47593808499534494600e-4) * rm
                    + 1.51986665636164571966e-2) * rm + 1.48103976427480074590e-1) * rm
                  + 6.89767334985100004550e-1) * rm + 1.67638483018380384940e0) * rm
                + 2.05319162663775882187e0) * rm + 1.0)
        val[mid] = num / den
        rf = r[~mid] - 5.0
        num = (((((((2.01033439929228813265e-7 * rf + 2.71155556874348757815e-5) * rf
                    + 1.24266094738807843860e-3) * rf + 2.65321895265761230930e-2) * rf
                  + 2.96560571828504891230e-1) * rf + 1.78482653991729133580e0) * rf
                + 5.46378491116411436990e0) * rf + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * rf + 1.42151175831644588870e-7) * rf
                    + 1.84631831751005468180e-5) * rf + 7.86869131145613259100e-4) * rf
                  + 1.48753612908506148525e-2) * rf + 1.36929880922735805310e-1) * rf
                + 5.99832206555887937690e-1) * rf + 1.0)
        val[~mid] = num / den
        out[tail] = np.where(qt < 0.0, -val, val)
    return out


def stream_key(seed: int, stream: int) -> np.uint64:
    """Key for one named stream of a seeded generator."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    with np.errstate(over="ignore"):
        base = mix64(np.array([seed], dtype=np.uint64))
        return mix64(base + _GOLDEN * np.uint64(stream + 1))[0]


class CounterRNG:
    """Stateless generator: draws are addressed, not consumed.

    ``rng.normal(stream, paths, counters)`` broadcasts ``paths`` against
    ``counters`` and returns standard normals; the same address always yields
    the same value.  ``split`` derives an independent child generator.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        stream_key(self.seed, 0)  # validates the seed

    def key(self, stream: int) -> np.uint64:
        return stream_key(self.seed, stream)

    def split(self, child: int) -> "CounterRNG":
        with np.errstate(over="ignore"):
            z = mix64(np.array([self.seed], dtype=np.uint64) ^ mix64(
                np.array([child + 1], dtype=np.uint64) * _PATHMUL))
        return CounterRNG(int(z[0]))

    def bits(self, stream, paths, counters):
        key = self.key(stream)
        p, c = np.broadcast_arrays(np.asarray(paths, dtype=np.uint64),
                                   np.asarray(counters, dtype=np.uint64))
        with np.errstate(over="ignore"):
            h = mix64(key ^ (p * _PATHMUL))
            return mix64(h + (c + _ONE) * _GOLDEN)

    def uniform(self, stream, paths, counters):
        return ((self.bits(stream, paths, counters) >> _S11) + 0.5) * _INV53

    def normal(self, stream, paths, counters):
        return ppnd(self.uniform(stream, paths, counters))
