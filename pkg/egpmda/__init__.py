# This file makes the egpmda directory a Python package
