"""Tables for the worked examples: exact distance times the inverse predicted rate.

A small max/min ratio of the diagnostic means the predicted rate is seen at
finite n.  The largest example generations are skipped here to keep the
run short; use `python3 -m gwve reproduce` for the full tables.

Run: python3 demos/05_reproduce_examples.py
"""

from gwve.reproduce import EXAMPLES, run_example

for name, spec in EXAMPLES.items():
    ns = [n for n in spec.ns if n <= 512]
    res = run_example(name, ns=ns)
    print(f"{name:6s} {spec.title:55s} {spec.diagnostic_name:26s} max/min = {res.ratio():.3f}  sources = {sorted(res.sources())}")
