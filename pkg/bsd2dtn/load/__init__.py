#!/usr/bin/env python

from .binary import read_matrix, write_matrix
from .fields import read_field_csv
from .records import load_spectral, save_spectral
