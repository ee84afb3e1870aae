"""District-month dengue incidence forecasting.

Pipeline: raw CSV ingestion and aggregation (dataprep), semi-supervised
larval-index imputation (imputation), a deterministic numerical kernel
(nn_core), LSTM variants trained by backpropagation through time (lstm),
an experiment harness with a synthetic data generator (experiments), and a
CLI tying it together (cli).
"""

__version__ = "0.1.0"
