"""
Error norms, speed-up and report aggregation

The relative error of a quantity Q is

    RE_Q = sqrt((Q_h - Q_r)^T (Q_h - Q_r)) / sqrt(Q_h^T Q_h)

with time histories flattened column-major. `literal_denominator=True` uses
`sqrt(Q_h^T Q_r)` in the denominator instead.
"""
from typing import Optional, Sequence

import attr
import numpy as np
import pandas as pd

from .param_space import ParameterPoint

REPORT_COLUMNS = ('re_u', 're_rf', 're_sigma')


def _flatten(q) -> np.ndarray:
    return np.asarray(q, dtype=np.float64).ravel(order='F')


def relative_error(q_hfm, q_rom, *, literal_denominator: bool = False) -> float:
    """Relative error of a reduced quantity against its reference

    Args:
        - q_hfm: reference field or history
        - q_rom: approximation, same shape

    Kwargs:
        - literal_denominator: divide by `sqrt(q_hfm^T q_rom)`

    Raises:
        ValueError: shapes differ, the reference is identically zero, or the
        literal denominator is not positive.
    """
    h = np.asarray(q_hfm, dtype=np.float64)
    r = np.asarray(q_rom, dtype=np.float64)
    if h.shape != r.shape:
        raise ValueError(f'shapes differ: {h.shape} and {r.shape}')
    h = _flatten(h)
    r = _flatten(r)

    reference = h @ h
    if reference == 0:
        raise ValueError('reference signal is identically zero')

    diff = h - r
    numerator = np.sqrt(diff @ diff)
    if literal_denominator:
        cross = h @ r
        if not cross > 0:
            raise ValueError(f'literal denominator undefined (q_hfm^T q_rom = {cross})')
        return float(numerator / np.sqrt(cross))
    return float(numerator / np.sqrt(reference))


def speedup(hfm_wall_s: float, rom_wall_s: float) -> float:
    """HFM wall time over ROM wall time; larger is faster"""
    if not (hfm_wall_s > 0 and rom_wall_s > 0):
        raise ValueError(
            f'wall times must be positive, got {hfm_wall_s} and {rom_wall_s}'
        )
    return hfm_wall_s / rom_wall_s


def _non_negative(instance, attribute, value):
    if value is not None and not value >= 0:
        raise ValueError(f'{attribute.name} must be non-negative, got {value}')


def _positive_or_none(instance, attribute, value):
    if value is not None and not value > 0:
        raise ValueError(f'{attribute.name} must be positive, got {value}')


@attr.s
class ComparisonReport:
    """HFM versus reduced run at one query point"""

    point: ParameterPoint = attr.ib()
    variant: str = attr.ib()
    re_u: float = attr.ib(validator=_non_negative)
    re_rf: Optional[float] = attr.ib(validator=_non_negative)
    re_sigma: Optional[float] = attr.ib(validator=_non_negative)
    order: int = attr.ib()
    subdomain: Optional[int] = attr.ib(default=None)
    hyper: bool = attr.ib(default=False)
    mesh_size: Optional[int] = attr.ib(default=None)
    n_elements: int = attr.ib(default=0)
    hfm_wall_s: Optional[float] = attr.ib(default=None)
    rom_wall_s: Optional[float] = attr.ib(default=None)
    speedup: Optional[float] = attr.ib(default=None, validator=_positive_or_none)
    interpolation_ops: Optional[int] = attr.ib(default=None)

    def row(self, names: Sequence[str]) -> dict:
        """Deterministic CSV row; timing is kept out"""
        row = {'variant': self.variant, 'hyper': self.hyper}
        row['subdomain'] = -1 if self.subdomain is None else self.subdomain
        row.update(dict(zip(names, self.point.coords)))
        row.update(
            {
                're_u': self.re_u,
                're_rf': self.re_rf,
                're_sigma': self.re_sigma,
                'order': self.order,
                'mesh_size': (
                    self.n_elements if self.mesh_size is None else self.mesh_size
                ),
                'n_elements': self.n_elements,
                'interpolation_ops': self.interpolation_ops,
            }
        )
        return row

    def timing_row(self, names: Sequence[str]) -> dict:
        row = {'variant': self.variant, 'hyper': self.hyper}
        row.update(dict(zip(names, self.point.coords)))
        row.update(
            {
                'hfm_wall_s': self.hfm_wall_s,
                'rom_wall_s': self.rom_wall_s,
                'speedup': self.speedup,
            }
        )
        return row


def compare(
    point: ParameterPoint,
    variant: str,
    hfm_displacements: np.ndarray,
    rom_displacements: np.ndarray,
    hfm_link_forces: Optional[np.ndarray],
    rom_link_forces: Optional[np.ndarray],
    *,
    order: int,
    literal_denominator: bool = False,
    **kwargs,
) -> ComparisonReport:
    """Build a report from HFM and reduced histories (T x n, T x n_e)

    The restoring-force error uses the whole link force history, the stress
    error its final time step.
    """
    re_u = relative_error(
        hfm_displacements, rom_displacements, literal_denominator=literal_denominator
    )
    re_rf = re_sigma = None
    if hfm_link_forces is not None and hfm_link_forces.size:
        re_rf = relative_error(
            hfm_link_forces, rom_link_forces, literal_denominator=literal_denominator
        )
        re_sigma = relative_error(
            hfm_link_forces[-1],
            rom_link_forces[-1],
            literal_denominator=literal_denominator,
        )
    return ComparisonReport(point, variant, re_u, re_rf, re_sigma, order, **kwargs)


def summarize(
    rows: pd.DataFrame, by: Sequence[str] = ('variant', 'hyper')
) -> pd.DataFrame:
    """Mean and maximum errors per group over all evaluated points"""
    by = list(by)
    columns = [c for c in REPORT_COLUMNS if c in rows.columns]
    if rows.empty:
        return pd.DataFrame(
            columns=by
            + ['points']
            + [f'{s}_{c}' for c in columns for s in ('mean', 'max')]
        )

    grouped = rows.groupby(by, sort=True)
    summary = grouped.size().rename('points').to_frame()
    for c in columns:
        summary[f'mean_{c}'] = grouped[c].mean()
        summary[f'max_{c}'] = grouped[c].max()
    return summary.reset_index()
