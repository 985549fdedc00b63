"""Desk-scale handwritten text line recognition toolkit.

Trains a small convolutional-recurrent line recognizer with a CTC loss
that can be weighted by human reaction-time measurements, decodes with a
character n-gram language model, and ships the annotation service used to
collect the timing data.
"""

__version__ = "0.1.0"
