"""Learned estimators: geometry-to-CSI transformers and the camera-frame blockage predictor."""
