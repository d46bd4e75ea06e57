"""
Management commands para o app core.
"""

