"""Sequential detection of encrypted regions in raw block streams."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .calibration import CalibrationResult, calibrate_threshold, estimate_arl0
from .detectors import (DetectorConfig, DetectorState, Direction, Drift, Method, NoAlarm,
                        initial_state, llr_step, run_until_alarm, update)
from .errors import (AlreadyStopped, BadObservation, CalibrationDiverged, DegenerateAlphabet,
                     EmptyBlock, ScanReadError, SieveError)
from .evaluation import MetricCurve, estimate_ced, estimate_pv, export_curves, parse_curves
from .indicator import (FIXED_BYTES, OBSERVED, AlphabetMode, BlockHistogram, IndicatorSample,
                        barkman_u, count_block, stream_indicators)
from .models import (ChangePointPrior, SeededRng, ShiftModel, gen_stream, sample_chi2,
                     sample_post, sample_pre, sample_theta)
from .scanner import (AlarmSegment, DetectionReport, RestartPolicy, ScanConfig, read_report,
                      scan_image, write_report)
