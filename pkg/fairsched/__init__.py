"""
fairsched: multi-resource, multi-server fair scheduling simulator
and fluid-optimization oracle.
"""

__version__ = "0.1.0"
