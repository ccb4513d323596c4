"""Pavement condition tools: deduct-value PCI, closed-form baselines and
hybrid neural PCI predictors (MLP-LM, MLP-SCG, RBF-GA, RBF-ICA) combined by
a committee machine."""

from .baselines import PciEstimate, dewan_smith_pci, michles_pci, obrien_pci, park_pci
from .cmis import PUBLISHED, CmisModel, combine, fit_weights
from .dataset import Dataset, Scaler, Segment, fit_scaler, load_csv, split, synth_generate, write_csv
from .errors import RoadInspectError
from .metrics import aapre, apre, input_impact, rmse, sd
from .pci_engine import compute_pci, load_curves, sample_curves

__version__ = "0.1.0"

__all__ = [
    "PUBLISHED", "CmisModel", "Dataset", "PciEstimate", "RoadInspectError", "Scaler", "Segment",
    "aapre", "apre", "combine", "compute_pci", "dewan_smith_pci", "fit_scaler", "fit_weights",
    "input_impact", "load_csv", "load_curves", "michles_pci", "obrien_pci", "park_pci", "rmse",
    "sample_curves", "sd", "split", "synth_generate", "write_csv",
]
