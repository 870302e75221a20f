"""Rehearse the acceptance batches at reduced seed counts."""
from dataclasses import replace

from hoversil.config import RunConfig
from hoversil.harness import run

N = 10
BASE = RunConfig()


def batch(scenario, mits, seeds):
    out = []
    for seed in seeds:
        cfg = replace(BASE, scenario=scenario, mitigations=mits, seed=seed)
        out.append(run(cfg))
    return out


def sc_rate(reports, sc):
    return sum(any(v.constraint == sc for v in r.violations) for r in reports) / len(reports)


def union_rate(reports, scs):
    return sum(
        any(v.constraint in scs for v in r.violations) for r in reports
    ) / len(reports)


seeds = range(1, N + 1)

nom = batch(None, (), range(1, 21))
worst = max(r.landing_error for r in nom)
viol = sum(len(r.violations) for r in nom)
print(f"C5 nominal20: worst_err={worst:.3f} violations={viol} "
      f"{'PASS' if worst <= 1.0 and viol == 0 else 'FAIL'}", flush=True)

for sid in ("S-UCA1", "S-UCA4"):
    un = batch(sid, (), seeds)
    mit = batch(sid, ("multi_marker", "secondary_altitude"), seeds)
    ru, rm = sc_rate(un, "SC-4"), sc_rate(mit, "SC-4")
    rel = (ru - rm) / ru if ru > 0 else float("nan")
    print(f"C6/C7 {sid}: unmit SC-4 {ru:.0%} (need >=60%), mit {rm:.0%}, "
          f"relative cut {rel:.0%} (need >=50%)", flush=True)

for sid in ("S-UCA5", "S-UCA8"):
    un = batch(sid, (), seeds)
    r = union_rate(un, ("SC-1", "SC-3", "SC-4", "SC-6"))
    print(f"C6 {sid}: union SC-1/3/4/6 {r:.0%} (need >=80%)", flush=True)

un7 = batch("S-UCA7", (), seeds)
mit7 = batch("S-UCA7", ("secondary_altitude",), seeds)
nz = sum(r.post_touchdown_thrust_ticks > 0 for r in un7)
z = sum(r.post_touchdown_thrust_ticks == 0 for r in mit7)
print(f"C6/C7 S-UCA7: unmit nonzero thrust {nz}/{N} (need all), "
      f"mit zero {z}/{N} (need all)", flush=True)

un2 = batch("S-UCA2", (), seeds)
mit2 = batch("S-UCA2", ("tagging",), seeds)
lower = sum(b.mean_pad_error < a.mean_pad_error for a, b in zip(un2, mit2))
spoof = sum(r.spoof_fusions for r in mit2)
print(f"C7 S-UCA2: tagged lower {lower}/{N} (need >=90%), "
      f"tagged spoof fusions {spoof} (need 0)", flush=True)

un3 = batch("S-UCA3", (), seeds)
mit3 = batch("S-UCA3", ("sequence_guard",), seeds)
mono = sum(r.fused_monotone for r in mit3)
broke = sum(not r.fused_monotone for r in un3)
print(f"C7 S-UCA3: guard monotone {mono}/{N} (need all); "
      f"unmit broken {broke}/{N}", flush=True)

un6 = batch("S-UCA6", (), seeds)
mit6 = batch("S-UCA6", ("adaptive",), seeds)
ratios = [a.hover_alt_error / max(b.hover_alt_error, 1e-9) for a, b in zip(un6, mit6)]
print(f"C7 S-UCA6: min ratio {min(ratios):.1f}x (need >=2x), "
      f"median {sorted(ratios)[N // 2]:.1f}x", flush=True)
