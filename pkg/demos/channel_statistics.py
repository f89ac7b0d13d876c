# Recover delay- and angle-spread distributions from generated channels.
#
# The simulator draws per-link RMS delay spread and azimuth spread from
# lognormal laws. Here we generate a dataset with known laws, detect the
# dominant paths of every link in the beam-delay domain, measure the two
# spreads, fit lognormals, and compare against what the simulator used.

import numpy as np

from sslpos import (
    ScenarioConfig,
    build_scenario,
    default_simulator_params,
    extract_statistics,
    generate_dataset,
    update_simulator_params,
)
from dataclasses import replace

config = ScenarioConfig(hall_width=40.0, hall_length=40.0, bs_spacing=20.0,
                        n_bs=4, n_delay=32)
scenario = build_scenario(config)

params = replace(
    default_simulator_params(config),
    ds_log_mean=-7.4, ds_log_std=0.18,
    as_log_mean=np.log10(25.0), as_log_std=0.12,
    # force NLOS so the direct path does not dilute the spread estimates
    los_k_override=1e-9,
)

ds = generate_dataset(scenario, params, n_samples=400, labeled=True, seed=11)
stats = extract_statistics(ds, bandwidth=config.bandwidth)

print("configured vs measured (log10 domain):")
print(f"  DS mean  {params.ds_log_mean:+.3f}   {stats.ds_log_mean:+.3f}")
print(f"  DS std    {params.ds_log_std:.3f}    {stats.ds_log_std:.3f}")
print(f"  AS mean  {params.as_log_mean:+.3f}   {stats.as_log_mean:+.3f}")
print(f"  AS std    {params.as_log_std:.3f}    {stats.as_log_std:.3f}")
print(f"  links measured: {stats.n_samples_used}")
print("\n(the delay spread comes back nearly exact; the angle spread is")
print(" biased upward because detected paths snap to the beam grid and")
print(" sidelobe leakage spreads power into neighboring beams)")

print("\nlinear-domain medians:")
print(f"  delay spread  {10 ** stats.ds_log_mean * 1e9:6.1f} ns"
      f"  (configured {10 ** params.ds_log_mean * 1e9:.1f} ns)")
print(f"  angle spread  {10 ** stats.as_log_mean:6.1f} deg"
      f"  (configured {10 ** params.as_log_mean:.1f} deg)")

# the fitted laws can drive a fresh simulator
updated = update_simulator_params(params, stats)
print("\nupdated simulator laws now carry the measured values:")
print(f"  ds_log_mean {updated.ds_log_mean:+.3f}, ds_log_std {updated.ds_log_std:.3f}")
print(f"  as_log_mean {updated.as_log_mean:+.3f}, as_log_std {updated.as_log_std:.3f}")
