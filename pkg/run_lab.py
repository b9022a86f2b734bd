#!/usr/bin/env python3
"""
Orlicz-ball lab

Volumes of high-dimensional Orlicz balls via tilted measures, exact uniform
sampling, and desk-scale checks of the limit laws:
1. volume / solve-lambda - asymptotic, closed-form, convolution and Monte Carlo volumes
2. sample - uniform points by rejection from the product tilted measure
3. boundary / marginals / clt / level / psi2 - limit-law experiments
4. audit - Young function and tilted-measure consistency checks

Usage:
    python run_lab.py volume --psi pow:1 --n 100 --E 100
    python run_lab.py sample --psi pow:2 --n 16 --E 4 --samples 1000 --output csv
    python run_lab.py boundary --psi pow:1 --n 200 --E 200 --samples 100000 --seed 0
"""

import sys

from orlicz_lab.cli import main

if __name__ == "__main__":
    sys.exit(main())
