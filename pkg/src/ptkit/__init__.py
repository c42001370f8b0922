"""Login page transparency toolkit.

Core pieces: the SPT codec (signed page timestamps carried in the
``SPT-Header`` HTTP header), a weighted-score login page detector, a
perceptual visual-similarity engine, the public log server (PLS), and
the client-side render gate.
"""

__version__ = "0.1.0"
