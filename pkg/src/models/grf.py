from dataclasses import dataclass, field

import numpy as np

from src.exceptions import InvalidInput


@dataclass(frozen=True, eq=False)
class GrfSignal:
    """Vertical ground reaction force per platform, sampled at ``fs`` Hz.

    ``forces`` has shape (platforms, samples) in newtons; sample i of every
    platform is taken at ``t0 + i / fs`` seconds.
    """

    fs: float
    forces: np.ndarray = field(repr=False)
    t0: float = 0.0

    def __post_init__(self):
        if not self.fs > 0:
            raise InvalidInput(f'fs must be positive, got {self.fs!r}')
        forces = np.array(self.forces, dtype=float)
        if forces.ndim == 1:
            forces = forces[np.newaxis, :]
        if forces.ndim != 2 or forces.shape[0] < 1 or forces.shape[1] < 1:
            raise InvalidInput(f'forces need shape (platforms, samples), got {forces.shape}')
        if not np.all(np.isfinite(forces)):
            raise InvalidInput('forces must be finite')
        forces.setflags(write=False)
        object.__setattr__(self, 'fs', float(self.fs))
        object.__setattr__(self, 't0', float(self.t0))
        object.__setattr__(self, 'forces', forces)

    def __eq__(self, other):
        if not isinstance(other, GrfSignal):
            return NotImplemented
        return (self.fs == other.fs and self.t0 == other.t0
                and np.array_equal(self.forces, other.forces))

    def __repr__(self):
        return f'<GrfSignal {self.n_platforms} platforms x {self.n_samples} samples @ {self.fs:g} Hz>'

    @property
    def n_platforms(self):
        return self.forces.shape[0]

    @property
    def n_samples(self):
        return self.forces.shape[1]

    @property
    def times(self):
        return self.t0 + np.arange(self.n_samples) / self.fs

    @property
    def duration_s(self):
        return self.n_samples / self.fs

    def to_dict(self):
        return {
            'fs': self.fs,
            't0': self.t0,
            'platforms': self.n_platforms,
            'samples': self.n_samples,
        }
