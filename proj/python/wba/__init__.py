"""Workplace-based assessment core: capture store, analytics, scheduling
and exam assembly, backed by the C++ library."""

import json

from ._wba import Service, WbaError
from ._wba import Dataset as _Dataset
from ._wba import generate_cohort_json as _generate_cohort_json

__all__ = ["Dataset", "Service", "WbaError", "generate_cohort"]


def generate_cohort(**config):
    """Synthetic cohort as {"registry", "batches", "staff_strictness", "anomalies"}.

    Keys: seed, students, staff, locations, procedures,
    procedures_per_location, items_per_procedure, questions, years,
    weeks_per_year, noise, strictness_overrides ({index: offset}),
    anomaly, anomaly_count.
    """
    if "strictness_overrides" in config:
        config["strictness_overrides"] = {str(k): v for k, v in config["strictness_overrides"].items()}
    return json.loads(_generate_cohort_json(json.dumps(config)))


class Dataset:
    """A registry and the capture batches synced against it."""

    def __init__(self, registry):
        self._core = _Dataset(json.dumps(registry))

    def sync(self, batch):
        """Applies one batch; returns "applied" or "duplicate"."""
        return self._core.sync(json.dumps(batch))

    @property
    def state_hash(self):
        return self._core.state_hash

    @property
    def observation_count(self):
        return self._core.observation_count

    def consistency(self, student, scope="all", threshold=4, last_sessions=None, start=None, end=None):
        """(meeting, applicable) session counts."""
        return self._core.consistency(student, scope, threshold, last_sessions, start, end)

    def barcode(self, student, scope="all", threshold=4, last_sessions=None):
        return json.loads(self._core.barcode_json(student, scope, threshold, last_sessions))

    def portfolio(self, student, min_experience=5, sufficiency=0.8, threshold=4):
        return json.loads(self._core.portfolio_json(student, min_experience, sufficiency, threshold))

    def calibration(self):
        return json.loads(self._core.calibration_json())

    def report(self, name):
        """CSV text of "coverage", "consistency", "calibration" or "portfolio"."""
        return self._core.report(name)

    def plan(self, students=None, procedures=()):
        return json.loads(self._core.plan_json(students, list(procedures)))

    def generate_exam(self, constraints, size_limit):
        """constraints: iterable of (outcome_id, min, max or None)."""
        return self._core.generate_exam([tuple(c) for c in constraints], size_limit)
