"""
Entry points: CLI, config-driven experiment session, SVG plots.
"""
