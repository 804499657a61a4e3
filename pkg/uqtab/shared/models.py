"""
Shared models used by the classical models, the BNN and the reports
"""

from typing import List

from pydantic import BaseModel, ConfigDict, Field


class ConfusionMatrix(BaseModel):
    """Binary confusion matrix; class 1 = recurred"""

    model_config = ConfigDict(frozen=True)

    tp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


class MetricsReport(BaseModel):
    """
    Accuracy, precision, recall and F1 of one confusion matrix
    `undefined` lists metrics whose denominator was zero (reported as 0)
    """

    model_config = ConfigDict(frozen=True)

    accuracy: float = Field(ge=0.0, le=1.0)
    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    confusion: ConfusionMatrix
    undefined: List[str] = Field(default_factory=list)
