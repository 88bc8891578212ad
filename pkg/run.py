#!/usr/bin/env python3
"""
constrex - avvio della CLI dal sorgente
"""

from constrex.cli import main

if __name__ == '__main__':
    main()
