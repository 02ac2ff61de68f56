"""Success-rate comparison between the two solvers on Gaussian ensembles.

Each trial draws a fresh ensemble and object, starts from a random lift,
and counts as a success when the final relative residual clears the
threshold.  The splitting penalty rho is paired with the relaxation value
beta = 1/(rho + 1); here a small paired slice of the full grid.

The full grid (ratios 3..5, ten parameter values each, 40 trials) is
behind the command line: saddle-raar sweep --full-grid
"""

import numpy as np

from saddle_raar import gaussian_success_sweep

sweep = gaussian_success_sweep(
    n=60,
    ratios=(3.0, 4.0),
    betas=(0.5, 0.8, 0.9),
    rhos=(1.0, 0.25, 1.0 / 9.0),
    trials=12,
    seed=0,
    max_iters=1500,
)

print("ratio  algo   param    success   median aligned error")
for cell in sweep.cells:
    errs = np.median([o.aligned_error for o in cell.outcomes])
    print(f"{cell.ratio:5.1f}  {cell.algo:5s}  {cell.param:.4f}  "
          f"{cell.successes:3d}/{cell.trials:<4d}  {errs:.2e}")

# Fully converged successes also certify as fixed points; a trial that
# crosses the success threshold right at the budget may still be settling.
succ = [o for c in sweep.cells for o in c.outcomes if o.success]
certified = sum(o.fixed_point_pass for o in succ)
print(f"\nfixed-point certificate at the final parameter: {certified}/{len(succ)} successes")
