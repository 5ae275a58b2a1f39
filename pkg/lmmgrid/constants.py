# Strike multipliers of L(0, T_5) used for every smile
BASE_STRIKES = (0.6, 1.0, 1.4, 1.8, 2.2, 2.6, 3.0, 3.4)

# Initial curve, with the two misprinted entries read as 0.023 and 0.028
BASE_CURVE = (0.0207, 0.023, 0.0262, 0.028, 0.0292, 0.0318, 0.0342, 0.0362, 0.0379, 0.04)
BASE_CURVE_AS_PRINTED = (0.0207, 0.23, 0.0262, 0.28, 0.0292, 0.0318, 0.0342, 0.0362, 0.0379, 0.04)

# Per-rate volatilities, constant over time
BASE_VOLS = (0.34, 0.32, 0.3, 0.28, 0.26, 0.24, 0.22, 0.2, 0.18, 0.16)

# Printed implied volatility tables, keyed by model name
REFERENCE_SMILES = {
    "bernoulli-exact": (0.542, 0.396, 0.334, 0.32, 0.277, 0.2875, 0.2832, 0.25),
    "lognormal-mc": (0.518, 0.333, 0.276, 0.253, 0.241, 0.234, 0.23, 0.226),
    "gz-mc": (0.437, 0.313, 0.285, 0.2745, 0.269, 0.265, 0.263, 0.261),
}
REFERENCE_TOLERANCE = {"bernoulli-exact": 0.02, "lognormal-mc": 0.015, "gz-mc": 0.015}

MODELS = ("bernoulli-exact", "bernoulli-mc", "lognormal-mc", "gz-mc")

PROBABILITY_TOLERANCE = 1e-12
DEFAULT_PATH_LIMIT = 2 ** 16
MAX_SUBSET_FACTORS = 20
DEFAULT_BATCH_SIZE = 50_000

IMPLIED_VOL_BRACKET = (1e-6, 5.0)
