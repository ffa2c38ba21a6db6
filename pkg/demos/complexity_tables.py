"""
Closed-form complexity
======================

Node counts and operation totals need no simulation: they follow from the
tree shape alone. This script prints the figures used to size a design.
"""

from vperturb import complexity as cx

# Visited nodes for the three tree searches at 4x4 (K = 8) and 8x8 (K = 16).
for row in cx.node_count_table():
    print(row)

# The FSE-p1 to QRDM-E node ratio tends to 1/T as K grows.
for t in (3, 5, 7, 9):
    print(f"T={t}: rho(8)={float(cx.rho(8, t)):.4f}  rho(64)={float(cx.rho(64, t)):.4f}  1/T={1 / t:.4f}")

# The depth-first sphere search has no such guarantee; its worst case grows as T^K.
print("\nsphere worst case at K=8, T=9:", cx.se_worst_case_nodes(8, 9))
print("FSE-p1 at K=8, T=9:           ", cx.fse_nodes(8, 9, 1))

# Multiplications and additions, tree search plus the amortized product table.
for n_f in (1, 10, 100):
    mul, add = cx.arithmetic_totals(8, 9, 2, n_f)
    print(f"N_f={n_f:3d}: {float(mul):7.1f} mults, {float(add):7.1f} adds per vector")
