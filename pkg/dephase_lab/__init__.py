# Dephasing-approach toolkit for linear-optics POVM feasibility - Modules Package
