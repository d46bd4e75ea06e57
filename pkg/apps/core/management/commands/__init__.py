"""
Management commands do core.
"""

