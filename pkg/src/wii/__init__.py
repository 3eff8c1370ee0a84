"""Wireless interference identification at desk scale.

Synthesizes a 15-class Bluetooth/WiFi/Zigbee I/Q dataset over a 10 MHz
capture of the 2.4 GHz ISM band, reduces training cost via band
selection, single-SNR training, PCA and sub-Nyquist subsampling, and
trains/evaluates two from-scratch CNN classifiers.
"""

__version__ = "0.1.0"
