"""myosonic: real-time biosignal sonification engine.

EMG streams from two wearable sensor bands drive physically-informed
sound objects through a calibrated feature pipeline and a weighted
many-to-many mapping matrix, mixed on a virtual mixer with a shared
breath effect bus. Runs live (OSC in, audio out, WebSocket control) or
renders offline with bit-reproducible determinism.
"""

__version__ = "0.1.0"
