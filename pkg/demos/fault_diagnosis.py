"""Rule-based diagnosis on simulated fault cases, and overall-level trending.

Run with ``python3 demos/fault_diagnosis.py [output_dir]``.
"""

import sys
from pathlib import Path

from rotorvib.corpus import corpus_modal, generate_case, generate_corpus, score_corpus
from rotorvib.diagnosis import FAULTS, TrendStore, diagnose, trend_append, trend_evaluate
from rotorvib.plots import plot_order_spectrum

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(parents=True, exist_ok=True)
modal = corpus_modal()

# One simulated case per fault, with the verdict and its evidence.
for label in FAULTS:
    case = generate_case(label, 0, seed=1)
    report = diagnose(case.spectrum, modal, reference=case.reference)
    print(f"{label:<13} at {case.speed:6.1f} rad/s -> detected {report.detected}")
    for name in report.detected:
        v = report.verdicts[name]
        print(f"    {name}: confidence {v.confidence:.2f}, {v.evidence}")
    plot_order_spectrum(case.spectrum, out / f"orders_{label}.svg")

# A small corpus, scored for recall, false positives and scale equivariance.
score = score_corpus(generate_corpus(4, seed=2), modal, n_scalings=3, seed=2)
print("\n".join(score.summary_lines()))

# Trending: a point drifting up from a 2 mm/s baseline trips alert, then danger.
store = TrendStore()
for day, v in enumerate((2.0, 2.4, 3.1, 4.5, 6.0, 9.0)):
    trend_append(store, "pump-de", {"v_rms_mm_s": v, "a_rms_g": 0.0, "d_rms_um": 0.0}, float(day))
    print(f"day {day}: {v:.1f} mm/s -> {trend_evaluate(store, 'pump-de')}")
