"""pronlearn: locale-agnostic TTS mispronunciation detection and correction.

Detect named-entity mispronunciations by comparing user and TTS
pronunciations in phoneme space (edit distance, embeddings + GBDT) and audio
space (DTW, conv Siamese, metric-learned DTW), calibrate thresholds to
precision targets, and apply engagement-gated per-user corrections.
"""

__version__ = "0.1.0"
