"""
Trained model bundle: vocabulary, relevance matrix and activation rule
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from ..utils.config import (
    DEFAULT_MI_TAU,
    DEFAULT_TAU,
    MODEL_FORMAT,
    MODEL_VERSION,
    STATISTIC_MUTUAL_INFORMATION,
)
from ..utils.files import read_json, write_json
from .errors import FormatError, InvalidInputError, ModelMismatchError
from .ess import ActivationThresholds
from .linker import RelevanceMatrix
from .vocab import Vocabulary

logger = logging.getLogger(__name__)


def default_tau_for(statistic: str) -> float:
    return DEFAULT_MI_TAU if statistic == STATISTIC_MUTUAL_INFORMATION else DEFAULT_TAU


@dataclass(frozen=True)
class GroundingModel:
    """Everything inference needs, frozen at training time"""

    vocabulary: Vocabulary
    relevance: RelevanceMatrix
    thresholds: ActivationThresholds
    default_tau: float
    vocab_size: Optional[int] = None

    def check_consistency(self):
        if tuple(self.vocabulary.tokens) != tuple(self.relevance.tokens):
            raise ModelMismatchError(
                "Relevance matrix token list does not match the bundled vocabulary"
            )

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "vocabulary": list(self.vocabulary.tokens),
            "vocab_size": self.vocab_size,
            "activation": {
                "confidence": self.thresholds.confidence,
                "area": self.thresholds.area,
            },
            "default_tau": self.default_tau,
            "relevance": self.relevance.to_dict(),
        }

    def save(self, path: Union[str, Path]):
        """
        Write the model JSON and a plain-text vocabulary next to it

        Args:
            path: Model file path; the vocabulary goes to <path>.vocab.txt
        """
        write_json(path, self.to_dict())
        self.vocabulary.save(vocab_path_for(path))
        logger.info("✅ Model written to %s", path)

    @classmethod
    def from_dict(cls, payload: dict, source: Optional[str] = None) -> "GroundingModel":
        if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
            raise FormatError("not a grounding model file", path=source)
        if payload.get("version") != MODEL_VERSION:
            raise FormatError(f"unsupported model version {payload.get('version')}", path=source)
        try:
            vocabulary = Vocabulary(tuple(payload["vocabulary"]))
            relevance = RelevanceMatrix.from_dict(payload["relevance"])
            activation = payload.get("activation") or {}
            thresholds = ActivationThresholds(
                confidence=float(activation.get("confidence", ActivationThresholds.confidence)),
                area=float(activation.get("area", ActivationThresholds.area)),
            )
            default_tau = float(payload.get("default_tau", default_tau_for(relevance.statistic)))
        except FormatError as e:
            raise FormatError(e.reason, path=source) from e
        except (KeyError, TypeError, ValueError, InvalidInputError) as e:
            raise FormatError(f"invalid model: {e}", path=source) from e
        model = cls(vocabulary, relevance, thresholds, default_tau, payload.get("vocab_size"))
        model.check_consistency()
        return model

    @classmethod
    def load(cls, path: Union[str, Path]) -> "GroundingModel":
        return cls.from_dict(read_json(path), source=str(path))


def vocab_path_for(model_path: Union[str, Path]) -> Path:
    model_path = Path(model_path)
    return model_path.with_name(model_path.name + ".vocab.txt")
