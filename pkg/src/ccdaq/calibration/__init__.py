from .ptc import PhotonTransferResult, photon_transfer
from .spectrum import NoiseSpectrum, noise_spectrum
from .linearity import TransferCurve, fit_transfer_curve

__all__ = [
    "NoiseSpectrum",
    "PhotonTransferResult",
    "TransferCurve",
    "fit_transfer_curve",
    "noise_spectrum",
    "photon_transfer",
]
