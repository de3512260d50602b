# Hybrid ASR decoding and language-modelling toolkit
__version__ = "0.1.0"
