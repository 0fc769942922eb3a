"""Activity decisions, symbol decisions, and reference-symbol phase correction.

Activity is decided per user from three additive log-likelihood terms:
the clustering evidence summed over the user's J observations, an offset
term that compares the posterior mean against the active/inactive prior
variances (guarding against false alarms on near-zero estimates), and
the activation prior log-odds ln(p_a / (1 - p_a)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .amp import Posterior
from .errors import ConfigError, ZeroReferenceSymbol
from .model import ExtendedAlphabet

# Responsibilities can underflow to exact zero after log-domain softmax;
# both sides of the activity likelihood ratio are floored so the
# log-ratio stays finite.
RESP_FLOOR = 1e-300


@dataclass
class DetectionResult:
    """Final decisions of one detector run.

    Rows of D_hat for users decided inactive are all-zero; rows of active
    users contain constellation symbols only.  activity_hat[m] == 1 exactly
    when llr_dec[m] > 0.
    """

    activity_hat: np.ndarray   # (M,) 0/1
    D_hat: np.ndarray          # (M, J) decided symbols
    channel_hat: np.ndarray    # (M,) channel estimates at the final iteration
    llr_dec: np.ndarray        # (M,) combined decision LLR
    llr_vbi: np.ndarray        # (M,) clustering-evidence LLR
    llr_offset: np.ndarray     # (M,) summed offset LLR


def vbi_activity_llr(resp: np.ndarray, m: int, j: int) -> float:
    """Clustering-evidence LLR of user m: sum over its J observations of
    ln(max active-component responsibility / null responsibility)."""
    block = resp[m * j:(m + 1) * j]
    num = np.maximum(block[:, 1:].max(axis=1), RESP_FLOOR)
    den = np.maximum(block[:, 0], RESP_FLOOR)
    return float(np.log(num / den).sum())


def offset_llr(x_hat_s: complex, tau_hat_s: float, e_sym: float) -> float:
    """Log-ratio of the posterior-mean density under the active prior
    (variance E_sym + tau) versus the inactive prior (variance tau)."""
    mag2 = abs(x_hat_s) ** 2
    return float(np.log(tau_hat_s / (e_sym + tau_hat_s))
                 + mag2 / tau_hat_s - mag2 / (e_sym + tau_hat_s))


def decision_llr(llr_vbi_m: float, offsets_for_m: np.ndarray, p_a: float) -> float:
    """Combined activity LLR: clustering evidence + offsets + prior log-odds."""
    if not 0.0 < p_a < 1.0:
        raise ConfigError(f"activity prior needs 0 < p_a < 1, got {p_a}")
    return float(llr_vbi_m + np.sum(offsets_for_m) + np.log(p_a / (1.0 - p_a)))


def _offset_llr_matrix(posterior: Posterior, e_sym: float) -> np.ndarray:
    mag2 = np.abs(posterior.Xhat) ** 2
    return (np.log(posterior.That / (e_sym + posterior.That))
            + mag2 / posterior.That - mag2 / (e_sym + posterior.That))


def detect(resp: np.ndarray, posterior: Posterior, channel_hat: np.ndarray,
           alphabet: ExtendedAlphabet, p_a: float,
           include_offset: bool = True) -> DetectionResult:
    """Fuse responsibilities and posterior moments into final decisions.

    Symbols of users decided active are the argmax over active components
    (ties resolve to the lowest symbol index); rows of users decided
    inactive are zeroed.  include_offset=False decides activity from the
    clustering-evidence LLR alone (no offsets, no prior): the ablation in
    which false alarms drive the error rate toward the inactive fraction.
    """
    if not 0.0 < p_a < 1.0:
        raise ConfigError(f"activity prior needs 0 < p_a < 1, got {p_a}")
    m, j = posterior.Xhat.shape
    resp3 = resp.reshape(m, j, -1)

    num = np.maximum(resp3[:, :, 1:].max(axis=2), RESP_FLOOR)
    den = np.maximum(resp3[:, :, 0], RESP_FLOOR)
    llr_vbi = np.log(num / den).sum(axis=1)
    llr_off = _offset_llr_matrix(posterior, alphabet.E_sym).sum(axis=1)
    if include_offset:
        llr_dec = llr_vbi + llr_off + np.log(p_a / (1.0 - p_a))
    else:
        llr_dec = llr_vbi.copy()

    active = llr_dec > 0.0
    best_k = resp3[:, :, 1:].argmax(axis=2) + 1
    d_hat = np.where(active[:, None], alphabet.symbols[best_k], 0.0 + 0.0j)
    return DetectionResult(
        activity_hat=active.astype(np.int8),
        D_hat=d_hat,
        channel_hat=np.asarray(channel_hat).copy(),
        llr_dec=llr_dec,
        llr_vbi=llr_vbi,
        llr_offset=llr_off,
    )


def correct_phase(d_hat_row: np.ndarray, rs_detected: complex, rs_true: complex,
                  alphabet: ExtendedAlphabet | None = None) -> np.ndarray:
    """Undo the constellation phase ambiguity of one active user's row.

    The whole row is multiplied by rs_true / rs_detected so the detected
    reference symbol maps onto the true one.  When an alphabet is given,
    each corrected symbol snaps to the nearest constellation point: for
    non-constant-modulus constellations the ratio can also rescale
    magnitudes, leaving values between grid points.
    """
    if rs_detected == 0:
        raise ZeroReferenceSymbol("detected reference symbol is zero")
    corrected = np.asarray(d_hat_row) * (rs_true / rs_detected)
    if alphabet is not None:
        dist = np.abs(corrected[:, None] - alphabet.active_symbols[None, :])
        corrected = alphabet.active_symbols[dist.argmin(axis=1)]
    return corrected
