"""
coughnet -- MFCC features, audio augmentation and a small convolutional
network for cough-sound classification, with stratified cross-validation.
"""

import importlib.metadata

__version__ = importlib.metadata.version('coughnet')
