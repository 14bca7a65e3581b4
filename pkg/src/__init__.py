"""relaysel - Whittle index relay selection: index solver and slot simulator"""

__version__ = "0.1.0"
