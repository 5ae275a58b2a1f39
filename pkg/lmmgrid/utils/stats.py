import math

import numpy


def mean(data):
    """Return the sample arithmetic mean of data, summed without rounding drift."""
    n = len(data)
    if n < 1:
        raise ValueError("mean requires at least one data point")
    return math.fsum(data) / float(n)


def weighted_mean(values, weights):
    """Return sum(w * v) / sum(w) with compensated summation."""
    values = numpy.asarray(values, dtype=float).ravel()
    weights = numpy.asarray(weights, dtype=float).ravel()
    if values.size < 1 or values.shape != weights.shape:
        raise ValueError("weighted mean needs matching, non-empty values and weights")
    return math.fsum(values * weights) / math.fsum(weights)


def _ss(data):
    """Return sum of square deviations of sequence data."""
    c = mean(data)
    return math.fsum((numpy.asarray(data, dtype=float) - c) ** 2)


def stdev(data):
    """Calculates the sample standard deviation."""
    n = len(data)
    if n < 2:
        raise ValueError("variance requires at least two data points")
    return (_ss(data) / (n - 1)) ** 0.5


def standard_error(data):
    """Standard error of the mean; zero for a single observation."""
    n = len(data)
    if n < 2:
        return 0.0
    return stdev(data) / math.sqrt(n)


def median(data):
    return float(numpy.median(numpy.asarray(data, dtype=float)))
