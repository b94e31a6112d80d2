"""fidelimax - 任意の測定計画に対するミニマックス最適なフィデリティ推定

鞍点問題を解いてアフィン推定量と厳密な信頼区間を構成する。
"""

__version__ = "0.1.0"
