"""Simulator and verification suite for the coupled parabolic flow of
(metric, spinor, k-form flux, normalization function) on flat periodic tori,
whose stationary points are covariantly constant spinors with flux."""

__version__ = "0.1.0"
