"""Trusted multi-view classification with evidential nets and belief fusion."""
from .fusion import TotalConflict, combine, combine_all
from .model import TmcModel, TrainConfig, train
from .opinion import DirichletParams, SubjectiveOpinion, dirichlet_from_opinion, opinion_from_dirichlet

__all__ = [
    "DirichletParams",
    "SubjectiveOpinion",
    "TmcModel",
    "TotalConflict",
    "TrainConfig",
    "combine",
    "combine_all",
    "dirichlet_from_opinion",
    "opinion_from_dirichlet",
    "train",
]
