"""
Utility modules for RapPCA
"""

# Make utils a proper package
__all__ = [
    'artifacts',
    'dataset',
    'errors',
    'logger',
    'metrics',
    'seeding',
    'simulation',
]
