"""
Map parameter points to structural models and load histories

`bouc_wen` varies the link parameters `(A, z_max)` under a sinusoidal nodal
load; `quake` keeps the links fixed and varies the `(cutoff_hz, amplitude)` of
a filtered-noise ground motion.
"""
from typing import Dict, Tuple

import numpy as np

from . import excite, fem
from .config import ExperimentConfig
from .excite import LoadHistory
from .param_space import ParameterPoint


class Scenario:
    """Builds the high-fidelity problem at any point of the domain"""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.names = cfg.grid.domain.names

    @property
    def steps(self) -> int:
        return int(round(self.cfg.load.total_s / self.cfg.integrator.dt))

    def parameters(self, point: ParameterPoint) -> Dict[str, float]:
        """Fixed configuration values overridden by the point's coordinates"""
        model = self.cfg.model
        load = self.cfg.load
        values = {
            'A': model.A,
            'z_max': model.z_max,
            'amplitude': load.amplitude,
            'cutoff_hz': load.cutoff_hz,
        }
        values.update(zip(self.names, point.coords))
        return values

    def link_stiffness(self) -> np.ndarray:
        """Per-story `k_link`, from the base value to `link_taper` times it"""
        cfg = self.cfg.model
        return cfg.k_link * np.linspace(1.0, cfg.link_taper, cfg.stories)

    def model(self, point: ParameterPoint) -> fem.StructuralModel:
        cfg = self.cfg.model
        values = self.parameters(point)
        z_max = values['z_max'] * cfg.z_max_scale
        links = [
            fem.LinkParams(k, values['A'], z_max, cfg.w) for k in self.link_stiffness()
        ]
        return fem.build_shear_frame(
            cfg.stories, cfg.story_mass, cfg.story_stiffness, cfg.damping_ratio, links
        )

    def pattern(self) -> np.ndarray:
        """Per-story load multipliers; asymmetric by default"""
        if self.cfg.load.pattern is not None:
            return np.array(self.cfg.load.pattern, dtype=np.float64)
        stories = self.cfg.model.stories
        return np.arange(1, stories + 1, dtype=np.float64) / stories

    def loads(self, point: ParameterPoint, model: fem.StructuralModel) -> LoadHistory:
        values = self.parameters(point)
        dt = self.cfg.integrator.dt
        load = self.cfg.load
        if self.cfg.model.scenario == 'bouc_wen':
            return excite.sinusoid(
                load.freq_hz, values['amplitude'], self.pattern(), dt, self.steps
            )

        params = excite.QuakeParams(
            values['cutoff_hz'],
            values['amplitude'],
            load.duration_s,
            load.total_s,
            self.seed(point),
        )
        pattern = None if load.pattern is None else self.pattern()
        return excite.filtered_noise_quake(params, np.diag(model.mass), dt, pattern)

    def seed(self, point: ParameterPoint) -> int:
        key = point.key() if self.cfg.load.noise == 'per_point' else 'shared'
        return excite.derive_seed(self.cfg.seed, key)

    def build(
        self, point: ParameterPoint
    ) -> Tuple[fem.StructuralModel, LoadHistory]:
        model = self.model(point)
        return model, self.loads(point, model)
