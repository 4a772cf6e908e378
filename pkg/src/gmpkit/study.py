"""End-to-end study pipeline: simulate, analyze, stats, stabilize.

Owns the on-disk layout of a run:

    out/
      manifest.json                         run manifest
      mvc/<subject>_rep<k>_emg.csv          MVC calibration recordings
      trials/<subject>_<test>_d<i>.csv      force/velocity (+ EMG companion)
      analysis/eop_estimates.csv            one row per estimated cell
      analysis/gmp_<subject>.json           per-subject GMP maps
      analysis/gmp_median.json              cohort median map
      analysis/spider_<subject>.csv         spoke-plot data
      stats/report.json, stats/report.csv   statistical report
      stabilize/...                         stabilizer scenario outputs

Everything is deterministic for a fixed (config, seed): per-trial random
streams are derived from the identity of the trial, not from execution
order, so parallel workers produce byte-identical files.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .biomech import (
    ActivationProfile,
    PerturbationSpec,
    Subject,
    TrialCondition,
    load_trial_csv,
    make_cohort,
    save_trial_csv,
    simulate_trial,
)
from .config import ScenarioConfig, StudyConfig, frequency_labels
from .emg import MvcCalibration, estimate_mvc, synthesize_emg
from .errors import ConfigError, DegenerateSampleError, GmpkitError, MapRangeError
from .gmp import GmpMap, build_map, fit_trend, load_map_json, lookup, median_map, save_map_json, save_spider_csv
from .passivity import EopEstimate, estimate_eop, estimates_to_csv
from .signals import SampledSignal, Window, write_csv
from .stabilizer import ForceFieldSpec, dissipation_savings, run_interconnection
from .stats import PairedSample, box_summary, ks_normality, wilcoxon_signed_rank

SCHEMA_VERSION = 1

MVC_REPETITIONS = 2
MVC_DURATION_S = 3.0


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def protocol_plan(config: StudyConfig) -> list[dict]:
    """The protocol's test grid: LR/LS/(HR/HS) with labels and targets."""
    plan = []
    for freq_label, hz in frequency_labels(config.protocol):
        for act_label, target in (
            ("relaxed", config.protocol.relaxed_target),
            ("stiff", config.protocol.stiff_target),
        ):
            code = ("L" if freq_label == "low" else "H") + ("R" if act_label == "relaxed" else "S")
            plan.append(
                {
                    "code": code,
                    "activation_label": act_label,
                    "frequency_label": freq_label,
                    "frequency_hz": hz,
                    "target_pct_mvc": target,
                }
            )
    return plan


# -- simulate ---------------------------------------------------------------


def _simulate_subject(config: StudyConfig, subject: Subject, subject_idx: int,
                      seed: int, out_dir: str) -> dict:
    out = Path(out_dir)
    plan = protocol_plan(config)

    # stage 1: MVC calibration from two maximum-effort recordings
    recordings = []
    rec_paths = []
    for rep in range(MVC_REPETITIONS):
        act_signal = _constant_activation_signal(config, MVC_DURATION_S)
        rec = synthesize_emg(
            act_signal,
            subject.mvc_rms,
            np.random.SeedSequence((seed, subject_idx, 90, rep)),
            rate=config.rates.emg_hz,
        )
        rel = f"mvc/{subject.subject_id}_rep{rep + 1}_emg.csv"
        write_csv(rec, out / rel)
        recordings.append(rec)
        rec_paths.append(rel)
    cal = estimate_mvc(recordings, config.emg.rms_window_s, config.emg.rms_stride_s)

    # stage 2: the four tests in randomized order, eight directions each
    order_rng = np.random.default_rng(np.random.SeedSequence((seed, subject_idx, 91)))
    order = [plan[i]["code"] for i in order_rng.permutation(len(plan))]

    trials = []
    for test_idx, test in enumerate(plan):
        act = ActivationProfile(target_pct_mvc=test["target_pct_mvc"])
        for direction in range(config.protocol.directions):
            spec = PerturbationSpec(
                frequency=test["frequency_hz"],
                amplitude=config.protocol.amplitude_m,
                direction_index=direction,
                duration=config.protocol.duration_s,
            )
            trial = simulate_trial(
                subject.params,
                spec,
                act,
                np.random.SeedSequence((seed, subject_idx, test_idx, direction)),
                rate=config.rates.robot_hz,
                mvc_rms=subject.mvc_rms,
                emg_rate=config.rates.emg_hz,
                subject_id=subject.subject_id,
                activation_label=test["activation_label"],
                frequency_label=test["frequency_label"],
            )
            rel = f"trials/{subject.subject_id}_{test['code']}_d{direction}.csv"
            save_trial_csv(trial, out / rel)
            trials.append(
                {
                    "trial_id": f"{subject.subject_id}_{test['code']}_d{direction}",
                    "test": test["code"],
                    "direction": direction,
                    "activation_label": test["activation_label"],
                    "frequency_label": test["frequency_label"],
                    "frequency_hz": test["frequency_hz"],
                    "target_pct_mvc": test["target_pct_mvc"],
                    "csv": rel,
                }
            )
    params = subject.params
    return {
        "subject_id": subject.subject_id,
        "params": {
            "mass": params.mass,
            "base_damping": params.base_damping,
            "stiffness": params.stiffness,
            "maxwell_stiffness": params.maxwell_stiffness,
            "maxwell_damping_base": params.maxwell_damping_base,
            "maxwell_damping_gain": params.maxwell_damping_gain,
            "direction_gains": list(params.direction_gains),
        },
        "mvc_rms_true": list(subject.mvc_rms),
        "mvc_rms": list(cal.mvc_rms),
        "mvc_recordings": rec_paths,
        "test_order": order,
        "trials": trials,
    }


def _constant_activation_signal(config: StudyConfig, duration: float) -> SampledSignal:
    rate = config.rates.robot_hz
    n = round(duration * rate) + 1
    t = np.arange(n) / rate
    # quick first-order rise to full effort, held for the rest of the window
    a = 1.0 - np.exp(-t / 0.2)
    return SampledSignal(rate, 0.0, ("a",), a)


def _simulate_subject_star(args):
    return _simulate_subject(*args)


def simulate_study(config: StudyConfig, out_dir, seed: int | None = None,
                   jobs: int | None = None) -> dict:
    """Run the full protocol for the whole cohort; returns the manifest."""
    config.validate()
    seed = config.cohort.seed if seed is None else seed
    jobs = config.output.jobs if jobs is None else jobs
    out = Path(out_dir)
    (out / "mvc").mkdir(parents=True, exist_ok=True)
    (out / "trials").mkdir(parents=True, exist_ok=True)

    cohort = make_cohort(
        n_subjects=config.cohort.subjects,
        jitter=config.cohort.jitter,
        seed=seed,
        base=config.limb,
    )
    tasks = [(config, subject, idx, seed, str(out)) for idx, subject in enumerate(cohort)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            subject_docs = list(pool.map(_simulate_subject_star, tasks))
    else:
        subject_docs = [_simulate_subject(*task) for task in tasks]

    manifest = {
        "toolkit_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "config": config.as_dict(),
        "subjects": subject_docs,
    }
    _check_manifest_files(manifest, out)
    _write_json(out / "manifest.json", manifest)
    return manifest


def _check_manifest_files(manifest: dict, out: Path) -> None:
    for subject in manifest["subjects"]:
        for rel in subject["mvc_recordings"]:
            if not (out / rel).exists():
                raise GmpkitError(f"manifest references missing file {rel}")
        for trial in subject["trials"]:
            if not (out / trial["csv"]).exists():
                raise GmpkitError(f"manifest references missing file {trial['csv']}")


def load_manifest(out_dir) -> dict:
    with open(Path(out_dir) / "manifest.json", "r") as fh:
        return json.load(fh)


# -- analyze ----------------------------------------------------------------


@dataclass
class AnalysisResult:
    estimates: list[EopEstimate]
    maps: dict[str, GmpMap]
    median: GmpMap | None
    n_expected: int
    n_missing: int
    warnings: list[str] = field(default_factory=list)

    @property
    def missing_fraction(self) -> float:
        return self.n_missing / self.n_expected if self.n_expected else 0.0


def analyze_study(out_dir, manifest: dict | None = None) -> AnalysisResult:
    """Estimate EoP on the analysis window of every trial and build maps."""
    out = Path(out_dir)
    manifest = manifest or load_manifest(out)
    config_doc = manifest["config"]
    protocol = config_doc["protocol"]
    emg_cfg = config_doc["emg"]
    window = Window(
        protocol["duration_s"] - protocol["analysis_window_s"], protocol["duration_s"]
    )
    analysis_dir = out / "analysis"
    analysis_dir.mkdir(parents=True, exist_ok=True)

    estimates: list[EopEstimate] = []
    warnings: list[str] = []
    maps: dict[str, GmpMap] = {}
    n_expected = 0
    n_missing = 0
    for subject in manifest["subjects"]:
        cal = MvcCalibration(mvc_rms=tuple(subject["mvc_rms"]))
        subject_estimates = []
        for entry in subject["trials"]:
            n_expected += 1
            path = out / entry["csv"]
            if not path.exists():
                n_missing += 1
                warnings.append(f"missing trial file {entry['csv']}")
                continue
            condition = TrialCondition(
                direction_index=entry["direction"],
                activation_label=entry["activation_label"],
                frequency_label=entry["frequency_label"],
            )
            spec = PerturbationSpec(
                frequency=entry["frequency_hz"],
                amplitude=protocol["amplitude_m"],
                direction_index=entry["direction"],
                duration=protocol["duration_s"],
            )
            trial = load_trial_csv(path, condition, spec, subject["subject_id"])
            subject_estimates.append(
                estimate_eop(
                    trial,
                    window,
                    cal=cal,
                    feedback_channels=tuple(emg_cfg["feedback_channels"]),
                    rms_window=emg_cfg["rms_window_s"],
                    rms_stride=emg_cfg["rms_stride_s"],
                )
            )
        gmp_map = build_map(subject_estimates, subject["subject_id"])
        if not gmp_map.complete:
            warnings.append(
                f"map {subject['subject_id']} missing {len(gmp_map.missing_cells())} cells"
            )
        maps[subject["subject_id"]] = gmp_map
        estimates.extend(subject_estimates)

    complete_maps = [m for m in maps.values() if m.complete]
    median = None
    if complete_maps:
        if len(complete_maps) < len(maps):
            warnings.append("median map computed over complete maps only")
        median = median_map(complete_maps)

    estimates_to_csv(estimates, analysis_dir / "eop_estimates.csv")
    for subject_id, gmp_map in maps.items():
        save_map_json(gmp_map, analysis_dir / f"gmp_{subject_id}.json")
        save_spider_csv(gmp_map, analysis_dir / f"spider_{subject_id}.csv")
    if median is not None:
        save_map_json(median, analysis_dir / "gmp_median.json")
        save_spider_csv(median, analysis_dir / "spider_median.csv")
    result = AnalysisResult(
        estimates=estimates,
        maps=maps,
        median=median,
        n_expected=n_expected,
        n_missing=n_missing,
        warnings=warnings,
    )
    _write_json(
        analysis_dir / "summary.json",
        {
            "n_expected": n_expected,
            "n_missing": n_missing,
            "complete_maps": sorted(m.subject_id for m in complete_maps),
            "warnings": warnings,
        },
    )
    return result


# -- stats ------------------------------------------------------------------

# (group_a, group_b) per contrast, expectation a > b
_CONTRASTS = (
    ("frequency_effect_relaxed", "LR", "HR"),
    ("frequency_effect_stiff", "LS", "HS"),
    ("activation_effect_low", "LS", "LR"),
    ("activation_effect_high", "HS", "HR"),
)

_GROUP_CODES = {
    ("relaxed", "low"): "LR",
    ("stiff", "low"): "LS",
    ("relaxed", "high"): "HR",
    ("stiff", "high"): "HS",
}


def _test_result_doc(result) -> dict:
    return {
        "statistic": result.statistic,
        "p_value": result.p_value,
        "method": result.method,
        "mark": result.significance_mark,
        "n": result.n,
    }


def _paired_contrast(a: list[float], b: list[float], sidedness: str = "two-sided") -> dict:
    """Wilcoxon doc for a paired contrast; identical groups carry no
    evidence against the null and are reported as p = 1 rather than an
    error."""
    if len(a) == len(b) and all(x == y for x, y in zip(a, b)):
        return {
            "statistic": 0.0,
            "p_value": 1.0,
            "method": "degenerate-zero-differences",
            "mark": "",
            "n": len(a),
        }
    try:
        result = wilcoxon_signed_rank(PairedSample(tuple(a), tuple(b)), sidedness)
    except (DegenerateSampleError, ValueError) as exc:
        return {"error": str(exc)}
    return _test_result_doc(result)


def stats_study(estimates: list[EopEstimate], out_dir=None,
                slope_sidedness: str = "greater") -> dict:
    """Reproduce the study's statistical analysis on a set of estimates.

    Groups the 40 per-test EoP values (subjects x directions), runs the KS
    normality pre-test per group, paired Wilcoxon signed-rank tests for the
    frequency and activation contrasts (paired by subject and direction),
    and compares the per-subject trend-line slopes between frequencies.
    The slope contrast is one-sided by default: it tests a directional
    hypothesis and, with five subjects, a two-sided exact signed-rank test
    cannot reach p < 0.05 at all.
    """
    subjects = sorted({e.subject_id for e in estimates})
    if len(subjects) < 2:
        raise DegenerateSampleError(f"stats need >= 2 subjects, got {len(subjects)}")

    by_cell: dict[tuple[str, str, int], EopEstimate] = {}
    for est in estimates:
        code = _GROUP_CODES.get((est.activation_label, est.frequency_label))
        if code is None:
            continue
        by_cell[(code, est.subject_id, est.direction_index)] = est

    directions = sorted({key[2] for key in by_cell})
    pairing = [(s, d) for s in subjects for d in directions]
    groups: dict[str, list[float]] = {}
    for code in ("LR", "LS", "HR", "HS"):
        values = [by_cell[(code, s, d)].xi for s, d in pairing if (code, s, d) in by_cell]
        if len(values) == len(pairing) and values:
            groups[code] = values

    report: dict = {"groups": {}, "contrasts": {}, "slopes": {}}
    csv_rows: list[dict] = []

    for code, values in groups.items():
        box = box_summary(values)
        doc = {
            "n": len(values),
            "box": {
                "median": box.median,
                "q1": box.q1,
                "q3": box.q3,
                "whisker_low": box.whisker_low,
                "whisker_high": box.whisker_high,
                "outliers": list(box.outliers),
            },
        }
        try:
            ks = ks_normality(values)
            doc["ks_normality"] = _test_result_doc(ks)
            csv_rows.append(
                {"kind": "ks_normality", "name": code, "group_a": code, "group_b": "",
                 "n": ks.n, "statistic": ks.statistic, "p_value": ks.p_value,
                 "method": ks.method, "mark": ks.significance_mark}
            )
        except DegenerateSampleError as exc:
            doc["ks_normality"] = {"error": str(exc)}
        report["groups"][code] = doc

    for name, code_a, code_b in _CONTRASTS:
        if code_a not in groups or code_b not in groups:
            continue
        doc = {"group_a": code_a, "group_b": code_b}
        doc.update(_paired_contrast(groups[code_a], groups[code_b]))
        if "p_value" in doc:
            csv_rows.append(
                {"kind": "wilcoxon", "name": name, "group_a": code_a, "group_b": code_b,
                 "n": doc["n"], "statistic": doc["statistic"], "p_value": doc["p_value"],
                 "method": doc["method"], "mark": doc["mark"]}
            )
        report["contrasts"][name] = doc

    freq_labels = sorted({e.frequency_label for e in estimates})
    slope_doc: dict = {"per_subject": {}}
    slopes_by_label: dict[str, list[float]] = {label: [] for label in freq_labels}
    for subject_id in subjects:
        subject_est = [e for e in estimates if e.subject_id == subject_id]
        entry = {}
        for label in freq_labels:
            trend = fit_trend(subject_est, label)
            entry[label] = {"slope": trend.slope, "intercept": trend.intercept,
                            "rss": trend.rss, "n": trend.n_points}
            slopes_by_label[label].append(trend.slope)
        slope_doc["per_subject"][subject_id] = entry
    if set(freq_labels) >= {"low", "high"}:
        doc = {"sidedness": slope_sidedness, "group_a": "slope_low", "group_b": "slope_high"}
        doc.update(
            _paired_contrast(slopes_by_label["low"], slopes_by_label["high"], slope_sidedness)
        )
        if "p_value" in doc:
            csv_rows.append(
                {"kind": "wilcoxon", "name": "slope_low_vs_high", "group_a": "slope_low",
                 "group_b": "slope_high", "n": doc["n"], "statistic": doc["statistic"],
                 "p_value": doc["p_value"], "method": doc["method"], "mark": doc["mark"]}
            )
        slope_doc["contrast"] = doc
    report["slopes"] = slope_doc

    if out_dir is not None:
        stats_dir = Path(out_dir) / "stats"
        stats_dir.mkdir(parents=True, exist_ok=True)
        _write_json(stats_dir / "report.json", report)
        with open(stats_dir / "report.csv", "w", newline="") as fh:
            fh.write("kind,name,group_a,group_b,n,statistic,p_value,method,mark\n")
            for row in csv_rows:
                fh.write(
                    f"{row['kind']},{row['name']},{row['group_a']},{row['group_b']},"
                    f"{row['n']},{repr(float(row['statistic']))},{repr(float(row['p_value']))},"
                    f"{row['method']},{row['mark']}\n"
                )
    return report


# -- stabilize ----------------------------------------------------------------


def _field_from_scenario(scenario: ScenarioConfig) -> ForceFieldSpec:
    if scenario.field_kind == "negative-damping":
        return ForceFieldSpec(kind="negative-damping", b_f=scenario.field_damping)
    return ForceFieldSpec(
        kind="delayed-spring", gain=scenario.spring_gain, delay=scenario.spring_delay_s
    )


def _run_to_files(run, out_dir: Path, tag: str) -> None:
    traj = SampledSignal(
        sample_rate=1.0 / (run.times[1] - run.times[0]),
        start_time=float(run.times[0]),
        channels=("pos", "vel", "force_field", "force_limb", "alpha"),
        data=np.column_stack([run.position, run.velocity, run.force_field,
                              run.force_limb, run.alpha]),
    )
    write_csv(traj, out_dir / f"{tag}_trajectory.csv")
    ledger = SampledSignal(
        sample_rate=traj.sample_rate,
        start_time=traj.start_time,
        channels=("field_energy", "injected_energy", "observer_w"),
        data=np.column_stack([run.field_energy_series, run.injected_series, run.observer_w]),
    )
    write_csv(ledger, out_dir / f"{tag}_ledger.csv")


def stabilize_study(config: StudyConfig, out_dir, map_path=None) -> dict:
    """Run the configured stabilizer scenario, with and without a GMP map."""
    scenario = config.stabilizer
    out = Path(out_dir) / "stabilize"
    out.mkdir(parents=True, exist_ok=True)
    field_spec = _field_from_scenario(scenario)
    perturbation = PerturbationSpec(
        frequency=scenario.frequency_hz,
        amplitude=scenario.amplitude_m,
        direction_index=scenario.direction,
        duration=scenario.duration_s,
    )
    act = ActivationProfile(target_pct_mvc=scenario.activation)

    gmp_map = None
    if map_path is not None:
        gmp_map = load_map_json(map_path)
        try:
            lookup(gmp_map, scenario.direction, scenario.activation, scenario.frequency_hz)
        except MapRangeError as exc:
            raise ConfigError(f"refusing scenario: {exc}") from None

    common = dict(
        limb=config.limb,
        field=field_spec,
        perturbation=perturbation,
        act=act,
        duration=scenario.duration_s,
        rate=config.rates.robot_hz,
        seed=scenario.seed,
        safety_factor=scenario.safety_factor,
    )
    baseline = run_interconnection(gmp_map=None, **common)
    _run_to_files(baseline, out, "baseline")
    summary = {
        "scenario": {
            "field_kind": field_spec.kind,
            "nominal_sop": field_spec.nominal_sop,
            "frequency_hz": scenario.frequency_hz,
            "direction": scenario.direction,
            "activation": scenario.activation,
            "safety_factor": scenario.safety_factor,
            "seed": scenario.seed,
        },
        "baseline": {
            "verdict": baseline.verdict,
            "injected_joules": baseline.injected_dissipation,
            "field_energy_joules": baseline.field_energy,
            "min_observer_w": baseline.min_observer_w,
        },
    }
    if gmp_map is not None:
        with_map = run_interconnection(gmp_map=gmp_map, **common)
        _run_to_files(with_map, out, "with_map")
        summary["with_map"] = {
            "verdict": with_map.verdict,
            "injected_joules": with_map.injected_dissipation,
            "field_energy_joules": with_map.field_energy,
            "min_observer_w": with_map.min_observer_w,
            "eop_budget": with_map.budget_rate,
        }
        if baseline.bounded and with_map.bounded:
            savings = dissipation_savings(with_map, baseline)
            summary["savings"] = {"ratio": savings.ratio, "joules_saved": savings.joules_saved}
    _write_json(out / "summary.json", summary)
    return summary
