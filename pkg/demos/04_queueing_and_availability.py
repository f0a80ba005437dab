"""
Queueing curves and availability sums
=====================================

"""
import math

import numpy as np

from regenquorum.analysis import (AvailabilityParams, binomial_bound, compare_empirical, completion_pmf,
                                  completion_zero_limit, mm1_pn, prob_at_least, prob_download_paper)
from regenquorum.sim_engine import backlog_experiment, run_mm1

# N0 queued requests, served at rate mu, no new arrivals
mu, reps = 10.0, 10_000
ts = np.linspace(0, 0.5, 6)
for N0 in (1, 5, 50):
    emp = backlog_experiment(N0, mu, ts, reps, seed=0)
    print(f"N0={N0}")
    for i, t in enumerate(ts):
        ref = completion_zero_limit(mu, t)
        none_done = emp[i, N0]
        flag = "" if abs(none_done - ref) <= binomial_bound(ref, reps) else "  <-- outside 3 sigma"
        print(f"  t={t:.1f}  exp(-mu t)={ref:.4f}  nothing served={none_done:.4f}  "
              f"all served={emp[i, 0]:.4f} (pmf {completion_pmf(N0, mu, t, 0):.4f}){flag}")

# all-served probability drains to zero as the backlog grows, it does not follow exp(-mu t)
print("P(all 200 served by t=0.1) =", completion_pmf(200, mu, 0.1, 0), "vs", math.exp(-1))

# a single chunk behind an exclusive lock is an M/M/1 queue
m = run_mm1(5.0, 10.0, 200_000, seed=0)
div = compare_empirical(m.in_system, lambda n: mm1_pn(5.0, 10.0, n), support=range(11))
print(f"M/M/1 total variation over n<=10: {div.tv:.4f}")

# the literal download sum carries an extra binomial factor and can exceed 1
v = prob_download_paper(AvailabilityParams(N=4, k=2, d=0, p_r=0.5))
print(f"download sum {v.value} (flagged: {v.out_of_range}), P(at least 2 of 4 up) = {prob_at_least(4, 2, 0.5)}")
