#!/usr/bin/env python3
"""Точка входа в приложение PhotonMux Hub"""

from photonmux_hub.cli.interface import main

if __name__ == "__main__":
    main()
