#!/usr/bin/env python3
"""
Script to run the hmil command line without installing the package
"""

from cli.main import run

if __name__ == "__main__":
    run()
