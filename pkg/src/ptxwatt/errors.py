"""Exception hierarchy shared by every ptxwatt module.

Two broad categories drive the CLI exit codes: problems with what the user
handed us (files, configs, metric inputs) and problems inside the models or
fitting math.
"""

from __future__ import annotations


class PtxWattError(Exception):
    """Base class for all tool errors."""

    exit_code = 3


class InputError(PtxWattError):
    """Bad input file, config, or metric argument (CLI exit code 2)."""

    exit_code = 2


class ModelError(PtxWattError):
    """Model or fitting failure on otherwise well-formed inputs (exit code 3)."""

    exit_code = 3


# --- PTX analysis -----------------------------------------------------------

class MalformedPtx(InputError):
    """Unbalanced braces, unresolvable branch label, or empty kernel body."""


class NoKernelFound(InputError):
    """No .entry kernel in the source, or the requested kernel name is absent."""


class AnnotationForUnknownLoop(InputError):
    """A trip-count annotation names a label that is not a loop header."""


class InvalidConfig(InputError):
    """Launch config violates warp alignment or architecture limits."""


# --- Calibration ------------------------------------------------------------

class SchemaViolation(InputError):
    """Profile or measurement file fails validation; message carries the field path."""


class NegativeDelta(ModelError):
    """Saturated power below idle power in a unit measurement."""


class ZeroRate(ModelError):
    """Unit saturation measurement with a non-positive peak operation rate."""


class ZeroSustained(ModelError):
    """Transient-ratio measurement with non-positive sustained power."""


class FitDiverged(ModelError):
    """Least-squares iteration produced non-finite parameters or residuals."""


class InsufficientSamples(ModelError):
    """Too few distinct samples to identify the power-law parameters."""


class InsufficientVariation(ModelError):
    """Shape sweep lacks aspect-ratio or coalescing variation for the fit."""


# --- Time model -------------------------------------------------------------

class ZeroDelay(ModelError):
    """Memory warp parallelism requested with a non-positive departure delay."""


class ZeroComputeCycles(ModelError):
    """Compute warp parallelism requested with zero compute cycles."""


class ZeroBandwidth(ModelError):
    """Effective bandwidth degenerated to zero while memory work remains."""


# --- Power model ------------------------------------------------------------

class ZeroCycles(ModelError):
    """Activity rate requested with non-positive exec or issue cycles."""


class CapAboveTdp(ModelError):
    """Power cap exceeds the device TDP (or is non-positive)."""


class EmptyGrid(ModelError):
    """Grid with zero blocks; no SM can be active."""


# --- Exploration ------------------------------------------------------------

class SharedMemOverflow(InputError):
    """Workload needs more shared memory per block than one SM provides."""


class NoFeasibleConfig(ModelError):
    """Every candidate configuration was filtered out."""


# --- Metrics ----------------------------------------------------------------

class EmptyTrace(InputError):
    """Power trace contains no samples."""


class ZeroBaseline(InputError):
    """Relative-change metric requested with a non-positive baseline."""


class RecommendedExceedsTotal(InputError):
    """More recommended configurations than candidates exist."""


class NonpositiveInput(InputError):
    """Greenup/speedup/powerup inputs must all be positive."""


class LengthMismatch(InputError):
    """Rank-correlation inputs differ in length or are too short."""


class DegenerateConstantInput(InputError):
    """Rank correlation is undefined when one input is constant."""
