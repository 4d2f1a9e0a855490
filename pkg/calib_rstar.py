import json
import time

from homoglab.experiments import ExperimentConfig, rstar_tail_study

cfg = ExperimentConfig(d=3, n=64, L=1.0, lam=0.2, symmetric=True,
                       cov_kind="gaussian_bump", variance=1.0,
                       ells=(1.0 / 16.0,), seeds_per_ell=8, master_seed=0,
                       rel_tol=1e-9)
t0 = time.time()
out = rstar_tail_study(cfg, seeds=256, ell=1.0 / 16.0)
out["wall"] = time.time() - t0
with open("calib_rstar.json", "w") as fh:
    json.dump({k: (v.tolist() if hasattr(v, "tolist") else v)
               for k, v in out.items()}, fh, indent=2, default=str)
print(json.dumps({k: (v.tolist() if hasattr(v, "tolist") else v)
                  for k, v in out.items()}, indent=2, default=str))
