"""CSV report writers. One file per metric, single header line, LF-only."""

import csv

from . import journal as jr


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_hourly_csv(series, fh):
    w = _writer(fh)
    w.writerow(
        [
            "hour",
            "active_workers",
            "invalid_workers",
            "added_workers",
            "iterations",
            "cumulative_iterations",
        ]
    )
    for p in series:
        w.writerow(
            [
                p.hour_index,
                p.active_workers,
                p.invalid_workers,
                p.added_workers,
                p.iterations_done,
                p.cumulative_iterations,
            ]
        )


def write_fscale_csv(series, fh, granularity=3, window_hours=24):
    """Windowed f_scale values; windows without uploads are reported empty."""
    w = _writer(fh)
    w.writerow(["window_start_hour", "window_end_hour", "f_scale"])
    n = len(series)
    for lo in range(0, n, window_hours):
        hi = min(lo + window_hours, n)
        value = jr.f_scale(series, (lo, hi), granularity=granularity)
        w.writerow([lo, hi, "" if value is None else f"{value:.6f}"])
    overall = jr.f_scale(series, granularity=granularity)
    w.writerow([0, n, "" if overall is None else f"{overall:.6f}"])


def write_useful_csv(registry_rows, k_rand, fh):
    useful, wasted = jr.useful_iterations(registry_rows, k_rand)
    w = _writer(fh)
    w.writerow(["k_rand", "useful_iterations", "wasted_iterations"])
    w.writerow([k_rand, useful, wasted])


def write_maturity_csv(registry_rows, fh, region=None):
    hist = jr.maturity_histogram(registry_rows, region=region)
    w = _writer(fh)
    w.writerow(["beta", "total_iterations", "in_sensitive_region"])
    for beta, (total, in_region) in hist.items():
        w.writerow([f"{beta:.6f}", total, int(in_region)])


def write_percentiles_csv(events, fh):
    percentiles, skipped = jr.duration_percentiles(events)
    w = _writer(fh)
    w.writerow(["beta", "p25_seconds", "p50_seconds", "p75_seconds"])
    for beta, (p25, p50, p75) in percentiles.items():
        w.writerow([f"{beta:.6f}", f"{p25:.3f}", f"{p50:.3f}", f"{p75:.3f}"])
    for beta in skipped:
        w.writerow([f"{beta:.6f}", "", "", ""])


def write_quotients_csv(quotients, fh):
    w = _writer(fh)
    w.writerow(["theta", "quotient", "error"])
    for theta, value, error in quotients:
        w.writerow([f"{theta:.10g}", f"{value:.10g}", f"{error:.10g}"])


def write_fit_summary(linear_fit, const_fit, fh):
    fh.write(
        "linear_fit intercept={:.10g} intercept_err={:.10g} "
        "slope={:.10g} slope_err={:.10g} chi2_per_dof={:.6g}\n".format(
            linear_fit.intercept.value,
            linear_fit.intercept.error,
            linear_fit.slope.value,
            linear_fit.slope.error,
            linear_fit.chi2_per_dof,
        )
    )
    fh.write(
        "constant_fit intercept={:.10g} intercept_err={:.10g} "
        "chi2_per_dof={:.6g}\n".format(
            const_fit.intercept.value,
            const_fit.intercept.error,
            const_fit.chi2_per_dof,
        )
    )


def write_summary(stats, scenario, fh):
    fh.write(f"total_iterations={stats.total_iterations}\n")
    fh.write(f"uploads={stats.uploads}\n")
    fh.write(f"stale_uploads={stats.stale_uploads}\n")
    fh.write(f"total_workers={stats.total_workers}\n")
    fh.write(f"peak_running_workers={stats.peak_running}\n")
    fh.write(f"cpu_years={stats.cpu_years:.3f}\n")
    fh.write(f"data_transfer_tb={stats.transfer_tb:.4f}\n")
    fh.write(f"downloads={stats.downloads}\n")
    fh.write(f"events_fired={stats.events_fired}\n")
    fh.write(f"horizon_seconds={scenario.horizon:.0f}\n")
