#!/usr/bin/env python3
"""Точка входа в приложение ESGPairs."""

import sys

from esgpairs.cli.interface import main

if __name__ == '__main__':
    sys.exit(main())

# poetry run esgpairs synth --output-dir data/synth --seed 7
# poetry run esgpairs run --config data/synth/config.json --output-dir output
# poetry run esgpairs esg-report --esg data/synth/esg.csv --as-of 2019-12
# poetry run esgpairs screen --prices data/synth/prices.csv --esg data/synth/esg.csv --max-pairs 25
# poetry run esgpairs backtest --prices data/synth/prices.csv --pairs output/pairstats.csv
